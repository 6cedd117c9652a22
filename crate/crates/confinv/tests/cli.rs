use std::io::Write;
use std::process::Command;

use serde_json::Value;
use tempfile::NamedTempFile;

struct Run {
    code: i32,
    json: Value,
    stdout: String,
}

fn confinv(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_confinv")).args(args).output().expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    Run { code: out.status.code().unwrap(), json, stdout }
}

fn spec(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn torus(n: usize) -> String {
    let e = |k: i32| {
        let mut f = vec![0; n];
        f[0] = k;
        format!("{f:?}")
    };
    format!(
        r#"{{"type":"torus_family","dim":{n},"params":{{"active_dims":1,"grid":24,
        "perturbation":[{{"i":0,"j":0,"amplitude":0.08,"freq":{f1},"phase":0.3}},
                        {{"i":1,"j":2,"amplitude":0.05,"freq":{f2},"phase":1.1}},
                        {{"i":3,"j":3,"amplitude":0.06,"freq":{f1},"phase":2.0}}],
        "log_factor":[{{"amplitude":0.1,"freq":{f1},"phase":0.7}}],
        "direction":[{{"amplitude":0.05,"freq":{f2},"phase":0.4}}]}}}}"#,
        f1 = e(1),
        f2 = e(2)
    )
}

#[test]
fn flat_point_is_all_zero() {
    let f = spec(r#"{"type":"flat","dim":5,"point":[0.1,0.2,0.3,0.4,0.5]}"#);
    let r = confinv(&["--json", "point", "--spec", path(&f), "--check"]);
    assert_eq!(r.code, 0);
    assert_eq!(num(&r.json["scalar_curvature"]), 0.0);
    for key in ["riemann", "weyl", "cotton", "bach"] {
        assert_eq!(num(&r.json["norms"][key]), 0.0, "{key}");
    }
    for key in ["sigma1", "sigma2", "v2", "v4"] {
        assert_eq!(num(&r.json["invariants"][key]), 0.0, "{key}");
    }
    assert_eq!(r.json["passed"], true);
}

#[test]
fn sphere_point_values() {
    let f = spec(r#"{"type":"sphere_stereographic","dim":7,"point":[0.1,0,0,0,0,0,0.2]}"#);
    let r = confinv(&["--json", "point", "--spec", path(&f), "--check"]);
    assert_eq!(r.code, 0);
    let inv = &r.json["invariants"];
    for (key, expect) in [("sigma1", 3.5), ("v2", -1.75), ("v4", 1.3125), ("v6", -0.546875)] {
        assert!((num(&inv[key]) - expect).abs() <= 1e-10, "{key}: {}", inv[key]);
    }
    assert!((num(&inv["expansion"]["tr_c4"]) - 0.4375).abs() <= 1e-10);
    assert!(num(&r.json["norms"]["weyl"]) <= 1e-12);
}

#[test]
fn hyperbolic_chart_boundary_is_an_input_error() {
    let f = spec(r#"{"type":"hyperbolic_ball","dim":3,"point":[1,0,0]}"#);
    let r = confinv(&["--json", "point", "--spec", path(&f)]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json["error"]["class"], "input");
    assert!(r.json["error"]["message"].as_str().unwrap().contains("DomainError"));
}

#[test]
fn indefinite_metric_is_a_numerical_error() {
    let f = spec(
        r#"{"type":"perturbed_flat","dim":3,"point":[0,0,0],
            "params":[{"i":0,"j":0,"amplitude":-1.5,"freq":[0,0,0],"phase":0}]}"#,
    );
    let r = confinv(&["--json", "point", "--spec", path(&f)]);
    assert_eq!(r.code, 3);
    assert_eq!(r.json["error"]["class"], "numerical");
}

#[test]
fn malformed_spec_is_an_input_error() {
    let f = spec(r#"{"type":"flat","dim":4,"point":[0,0]}"#);
    assert_eq!(confinv(&["--json", "point", "--spec", path(&f)]).code, 2);
    let missing = confinv(&["--json", "point", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(missing.code, 2);
}

#[test]
fn weyl_law_on_conformally_flat_family() {
    let f = spec(r#"{"type":"conformally_flat","dim":6,"point":[0,0,0,0,0,0]}"#);
    let r = confinv(&["--json", "laws", "--spec", path(&f), "--law", "weyl", "--trials", "10"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json["passed"], true);
    assert_eq!(r.json["dims"], serde_json::json!([6]));
}

#[test]
fn newton_divergence_on_conformally_flat_family() {
    let f = spec(r#"{"type":"conformally_flat","dim":6,"point":[0,0,0,0,0,0]}"#);
    let r = confinv(&["--json", "laws", "--spec", path(&f), "--law", "newton-div", "--trials", "10"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
}

#[test]
fn bach_law_fifty_trials() {
    let f = spec(r#"{"type":"perturbed_flat","dim":6,"point":[0,0,0,0,0,0]}"#);
    let r = confinv(&["--json", "laws", "--spec", path(&f), "--law", "bach", "--trials", "50", "--seed", "7"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let check = &r.json["checks"][0];
    assert!(num(&check["max"]) <= 1e-7);
}

#[test]
fn corrupted_sign_breaches() {
    let r = confinv(&["--json", "laws", "--law", "schouten", "--trials", "5", "--corrupt-sign"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.json["passed"], false);
    assert!(num(&r.json["checks"][0]["max"]) > 1e-3);
}

#[test]
fn bach_law_needs_four_dimensions() {
    let f = spec(r#"{"type":"perturbed_flat","dim":3,"point":[0,0,0]}"#);
    assert_eq!(confinv(&["--json", "laws", "--spec", path(&f), "--law", "bach", "--trials", "2"]).code, 2);
}

#[test]
fn variation_of_flat_family_is_zero() {
    let f = spec(r#"{"type":"torus_family","dim":5,"params":{"active_dims":2}}"#);
    let r = confinv(&["--json", "variation", "--spec", path(&f), "-k", "2"]);
    assert_eq!(r.code, 0);
    for key in ["f_value", "fd_derivative", "analytic_derivative"] {
        assert_eq!(num(&r.json["report"][key]), 0.0, "{key}");
    }
}

#[test]
fn variation_agrees_off_critical_dimension() {
    let f = spec(&torus(7));
    let r = confinv(&["--json", "variation", "--spec", path(&f), "-k", "3"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let rep = &r.json["report"];
    assert!(num(&rep["analytic_derivative"]).abs() > 1e-5);
    assert!(num(&rep["rel_discrepancy"]) <= 1e-5);
    for o in r.json["observed_orders"].as_array().unwrap() {
        assert!((num(o) - 2.0).abs() <= 0.4);
    }
}

#[test]
fn variation_is_invariant_in_critical_dimension() {
    let f = spec(&torus(6));
    let r = confinv(&["--json", "variation", "--spec", path(&f), "-k", "3"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(num(&r.json["report"]["f_value"]).abs() > 1e-3);
    assert!(num(&r.json["invariance_rel"]) <= 1e-8);
}

#[test]
fn variation_rank_error() {
    let f = spec(r#"{"type":"torus_family","dim":5,"params":{"active_dims":1}}"#);
    assert_eq!(confinv(&["--json", "variation", "--spec", path(&f), "-k", "3"]).code, 2);
}

#[test]
fn suite_filter_by_group() {
    let r = confinv(&["--json", "suite", "--filter", "laws"]);
    assert_eq!(r.code, 0);
    let ids: Vec<u64> = r.json["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [5, 6, 7]);
    assert_eq!(confinv(&["--json", "suite", "--filter", "nothing"]).code, 2);
}

#[test]
fn fixed_seed_gives_identical_output() {
    let args = ["--json", "laws", "--law", "newton-div", "--trials", "10", "--seed", "11"];
    let a = confinv(&args);
    let b = confinv(&args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let c = confinv(&["--json", "laws", "--law", "newton-div", "--trials", "10", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}
