use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use confinv::error::{CliResult, Failure, EXIT_BREACH, EXIT_PASS};
use confinv::exec::Parallel;
use confinv::family;
use confinv::laws::{self, Family, Law, LawRequest};
use confinv::point;
use confinv::spec_file::{MetricKind, MetricSpecFile};
use confinv::suite::{self, DEFAULT_SEED};
use confinv::table::{render, sci, verdict};
use confinv_core::variation::DEFAULT_EPS;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "confinv", version, about = "Curvature, conformal laws and renormalized volume coefficients")]
struct Cli {
    /// Only print JSON; skip the table on stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Curvature norms and invariants of one metric at one point.
    Point {
        #[arg(long)]
        spec: PathBuf,
        /// Also run the structural checks.
        #[arg(long)]
        check: bool,
    },
    /// Randomized trials of one pointwise law.
    Laws {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        law: Law,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        corrupt_sign: bool,
    },
    /// First variation of F_k along a torus family.
    Variation {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Every acceptance criterion.
    Suite {
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn emit<T: Serialize>(value: &T) {
    // a closed pipe (e.g. `| head`) is not an error worth a panic
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn laws_family(spec: &MetricSpecFile) -> CliResult<Family> {
    Ok(match spec.kind {
        MetricKind::PerturbedFlat if spec.params.is_null() => Family::Perturbed,
        MetricKind::ConformallyFlat if spec.params.is_null() => Family::ConformallyFlat,
        MetricKind::TorusFamily => return Err(Failure::Input("laws need a point metric spec".into())),
        _ => Family::Fixed(spec.clone()),
    })
}

fn run(cli: Cli) -> CliResult<i32> {
    let quiet = cli.json;
    let exec = Parallel::from_env();
    match cli.cmd {
        Cmd::Point { spec, check } => {
            let spec = MetricSpecFile::load(&spec)?;
            let r = point::report(&spec, check)?;
            emit(&r);
            if !quiet {
                let mut rows = vec![
                    vec!["J".into(), sci(r.j)],
                    vec!["|Rm|".into(), sci(r.norms.riemann)],
                    vec!["|W|".into(), sci(r.norms.weyl)],
                    vec!["v2".into(), sci(r.invariants.v2)],
                    vec!["v4".into(), sci(r.invariants.v4)],
                ];
                if let Some(v6) = r.invariants.v6 {
                    rows.push(vec!["v6".into(), sci(v6)]);
                }
                for c in r.checks.iter().flatten() {
                    rows.push(vec![c.name.clone(), format!("{} (tol {}) {}", sci(c.max), sci(c.tolerance), verdict(c.passed))]);
                }
                eprint!("{}", render(&["quantity", "value"], &rows));
            }
            Ok(if r.passed { EXIT_PASS } else { EXIT_BREACH })
        }
        Cmd::Laws { spec, law, trials, seed, corrupt_sign } => {
            let (dims, family, spec_seed) = match spec {
                Some(p) => {
                    let s = MetricSpecFile::load(&p)?;
                    (vec![s.dim], laws_family(&s)?, s.seed)
                }
                None => (vec![5, 6, 7], Family::Perturbed, None),
            };
            let seed = seed.or(spec_seed).unwrap_or(DEFAULT_SEED);
            let r = laws::run(&LawRequest { law, dims, trials, seed, family, corrupt_sign }, &exec)?;
            emit(&r);
            if !quiet {
                let rows: Vec<Vec<String>> = r
                    .checks
                    .iter()
                    .map(|c| vec![c.name.clone(), sci(c.max), sci(c.tolerance), verdict(c.passed)])
                    .collect();
                eprint!("{}", render(&["check", "max", "tolerance", ""], &rows));
            }
            Ok(if r.passed { EXIT_PASS } else { EXIT_BREACH })
        }
        Cmd::Variation { spec, k, eps, grid } => {
            let file = MetricSpecFile::load(&spec)?;
            let mut torus = file.torus()?;
            if let Some(m) = grid {
                torus.grid = m;
                torus.validate().map_err(Failure::at_load)?;
            }
            let out = family::run(&torus, k, eps, true, &exec)?;
            emit(&out);
            if !quiet {
                let r = &out.report;
                let mut rows = vec![
                    vec!["F_k".into(), sci(r.f_value)],
                    vec!["fd".into(), sci(r.fd_derivative)],
                    vec!["analytic".into(), sci(r.analytic_derivative)],
                    vec!["rel discrepancy".into(), sci(r.rel_discrepancy)],
                ];
                for s in &r.sweep {
                    rows.push(vec![format!("eps {}", sci(s.eps)), sci(s.abs_error)]);
                }
                if let Some(inv) = out.invariance_rel {
                    rows.push(vec!["max |F(t)-F(0)|/|F(0)|".into(), sci(inv)]);
                }
                rows.push(vec!["verdict".into(), verdict(out.passed)]);
                eprint!("{}", render(&["quantity", "value"], &rows));
            }
            Ok(if out.passed { EXIT_PASS } else { EXIT_BREACH })
        }
        Cmd::Suite { filter, seed } => {
            let mut progress = |c: &suite::CriterionResult, t: std::time::Duration| {
                if !quiet {
                    eprintln!("criterion {:>2} {:<22} {}  {:.1}s", c.id, c.name, verdict(c.passed), t.as_secs_f64());
                }
            };
            let r = suite::run(seed, filter.as_deref(), &exec, &mut progress)?;
            emit(&r);
            Ok(if r.passed { EXIT_PASS } else { EXIT_BREACH })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            emit(&f.to_json());
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
