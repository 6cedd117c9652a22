mod common;

use std::f64::consts::{PI, TAU};

use confinv_core::catalog::{MetricTerm, TrigMode, TrigPolynomial};
use confinv_core::variation::{
    descent_step, euler_lagrange_residual, first_variation_analytic, first_variation_fd, functional_fk,
    integrate_flat, variation_report, Sequential, TorusMetricSpec,
};
use confinv_core::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn active_freq(rng: &mut ChaCha8Rng, n: usize, d: usize, max: i32) -> Vec<i32> {
    loop {
        let f: Vec<i32> = (0..n).map(|a| if a < d { rng.gen_range(-max..=max) } else { 0 }).collect();
        if f.iter().any(|k| *k != 0) {
            return f;
        }
    }
}

fn random_spec(rng: &mut ChaCha8Rng, n: usize, d: usize, grid: usize) -> TorusMetricSpec {
    let perturbation = (0..4)
        .map(|_| MetricTerm {
            i: rng.gen_range(0..n),
            j: rng.gen_range(0..n),
            amplitude: rng.gen_range(-0.1..0.1),
            freq: active_freq(rng, n, d, 2),
            phase: rng.gen_range(0.0..TAU),
        })
        .collect();
    let trig = |rng: &mut ChaCha8Rng, amp: f64| {
        TrigPolynomial(
            (0..2)
                .map(|_| TrigMode {
                    amplitude: rng.gen_range(-amp..amp),
                    freq: active_freq(rng, n, d, 2),
                    phase: rng.gen_range(0.0..TAU),
                })
                .collect(),
        )
    };
    let log_factor = trig(rng, 0.1);
    let direction = trig(rng, 0.25);
    TorusMetricSpec { dim: n, active_dims: d, perturbation, log_factor, direction, grid }
}

#[test]
fn quadrature_is_exact_below_nyquist() {
    let spec = TorusMetricSpec::flat(3, 1, 16);
    let full = TAU * TAU;
    let v = integrate_flat(&spec, |x| x[0].cos().powi(2));
    assert!((v - PI * full).abs() <= 1e-12 * PI * full);
    let v = integrate_flat(&spec, |x| (3.0 * x[0]).sin() * (3.0 * x[0]).sin());
    assert!((v - PI * full).abs() <= 1e-12 * PI * full);
    let v = integrate_flat(&spec, |x| (2.0 * x[0] + 0.3).cos());
    assert!(v.abs() <= 1e-12);

    let spec = TorusMetricSpec::flat(5, 2, 24);
    let vol = TAU.powi(5);
    let v = integrate_flat(&spec, |x| (2.0 * x[0] - 3.0 * x[1] + 1.0).cos().powi(2));
    assert!((v - vol / 2.0).abs() <= 1e-12 * vol);
    let v = integrate_flat(&spec, |x| (x[0] + x[1]).cos() * (x[0] - x[1]).cos());
    assert!(v.abs() <= 1e-12 * vol);
    assert!((integrate_flat(&spec, |_| 1.0) - vol).abs() <= 1e-12 * vol);
}

#[test]
fn flat_family_is_zero() {
    let mut rng = common::rng(61);
    for (k, n) in [(1, 3), (2, 5), (3, 7)] {
        let base = TorusMetricSpec::flat(n, 2, 8);
        let spec = base.with_direction(random_spec(&mut rng, n, 2, 8).direction);
        assert_eq!(functional_fk(&spec, 0.0, k, &Sequential).unwrap(), 0.0);
        assert_eq!(first_variation_analytic(&spec, k, &Sequential).unwrap(), 0.0);
        assert_eq!(euler_lagrange_residual(&spec, k, &Sequential).unwrap(), 0.0);
    }
}

#[test]
fn homogeneous_rescale_of_flat() {
    let mut spec = TorusMetricSpec::flat(5, 1, 8);
    spec.log_factor = TrigPolynomial::constant(0.4);
    for k in [1, 2] {
        assert!(euler_lagrange_residual(&spec, k, &Sequential).unwrap() <= 1e-14);
        assert!(functional_fk(&spec, 0.0, k, &Sequential).unwrap().abs() <= 1e-14);
    }
}

#[test]
fn constant_direction_leaves_functional_unchanged() {
    let mut rng = common::rng(62);
    for (k, n) in [(1, 3), (1, 5), (2, 5)] {
        let spec = random_spec(&mut rng, n, 2, 16).with_direction(TrigPolynomial::constant(1.0));
        let f0 = functional_fk(&spec, 0.0, k, &Sequential).unwrap();
        for t in [0.05, 0.3] {
            let ft = functional_fk(&spec, t, k, &Sequential).unwrap();
            assert!((ft - f0).abs() <= 1e-12 * f0.abs());
        }
        let fd = first_variation_fd(&spec, k, 1e-3, &Sequential).unwrap();
        assert!(fd.abs() <= 1e-9 * f0.abs().max(1.0), "k={k} n={n}: {fd:e}");
        assert!(first_variation_analytic(&spec, k, &Sequential).unwrap().abs() <= 1e-9 * f0.abs().max(1.0));
    }
}

#[test]
fn finite_difference_matches_analytic_variation() {
    let mut rng = common::rng(63);
    for (k, n, d) in [(1, 3, 2), (1, 4, 2), (2, 5, 2), (2, 6, 1), (3, 7, 1)] {
        let spec = random_spec(&mut rng, n, d, 24);
        spec.validate().unwrap();
        let r = variation_report(&spec, k, 1e-3, &[4e-3, 2e-3, 1e-3], &Sequential).unwrap();
        assert!(r.analytic_derivative.abs() > 1e-6 * r.f_value.abs(), "k={k} n={n}: {r:?}");
        assert!(r.agrees(1e-5, 1e-8), "k={k} n={n}: {r:?}");
        let orders = r.observed_orders(1e-9 * r.analytic_derivative.abs());
        assert!(!orders.is_empty());
        for o in orders {
            assert!((o - 2.0).abs() <= 0.2, "k={k} n={n}: order {o}");
        }
    }
}

#[test]
fn invariance_in_critical_dimension() {
    let mut rng = common::rng(64);
    for (k, n, d) in [(2, 4, 2), (3, 6, 1)] {
        let spec = random_spec(&mut rng, n, d, 48);
        let f0 = functional_fk(&spec, 0.0, k, &Sequential).unwrap();
        assert!(f0.abs() > 1e-6);
        for t in [0.05, 0.1] {
            let ft = functional_fk(&spec, t, k, &Sequential).unwrap();
            assert!((ft - f0).abs() <= 1e-8 * f0.abs(), "k={k}: {f0} vs {ft}");
        }
        assert_eq!(first_variation_analytic(&spec, k, &Sequential).unwrap(), 0.0);
    }
}

#[test]
fn invariance_fails_off_critical_dimension() {
    let mut rng = common::rng(65);
    let spec = random_spec(&mut rng, 5, 2, 16);
    let f0 = functional_fk(&spec, 0.0, 2, &Sequential).unwrap();
    let f1 = functional_fk(&spec, 0.1, 2, &Sequential).unwrap();
    assert!((f1 - f0).abs() > 1e-4 * f0.abs());
}

#[test]
fn descent_step_lowers_functional() {
    let mut rng = common::rng(66);
    for (k, n) in [(1, 3), (2, 5)] {
        let spec = random_spec(&mut rng, n, 2, 16);
        let r = descent_step(&spec, k, 1e-3, &Sequential).unwrap();
        assert!(r.residual_before > 0.0);
        assert!(r.descends(), "{r:?}");
        let actual = r.f_after - r.f_before;
        assert!((actual - r.predicted_change).abs() <= 0.05 * r.predicted_change.abs(), "{r:?}");
    }
}

#[test]
fn reports_are_reproducible() {
    let mut rng = common::rng(67);
    let spec = random_spec(&mut rng, 5, 2, 12);
    let a = variation_report(&spec, 2, 1e-3, &[2e-3, 1e-3], &Sequential).unwrap();
    let b = variation_report(&spec.clone(), 2, 1e-3, &[2e-3, 1e-3], &Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.f_value.to_bits(), b.f_value.to_bits());
}

#[test]
fn input_errors() {
    let spec = TorusMetricSpec::flat(5, 1, 8);
    functional_fk(&TorusMetricSpec::flat(6, 1, 8), 0.0, 3, &Sequential).unwrap();
    assert!(matches!(functional_fk(&spec, 0.0, 3, &Sequential), Err(Error::Dimension { .. })));
    assert!(matches!(functional_fk(&TorusMetricSpec::flat(4, 1, 8), 0.0, 3, &Sequential), Err(Error::Dimension { .. })));
    assert!(matches!(functional_fk(&TorusMetricSpec::flat(3, 1, 8), 0.0, 2, &Sequential), Err(Error::Dimension { .. })));
    assert!(matches!(functional_fk(&spec, 0.0, 4, &Sequential), Err(Error::Rank { .. })));
    assert!(matches!(first_variation_fd(&spec, 1, 0.0, &Sequential), Err(Error::Domain(_))));
    let mut bad = TorusMetricSpec::flat(3, 1, 8);
    bad.perturbation.push(MetricTerm { i: 0, j: 0, amplitude: -1.5, freq: vec![1, 0, 0], phase: 0.0 });
    assert!(matches!(bad.validate(), Err(Error::SpdViolation { .. })));
    assert!(matches!(functional_fk(&bad, 0.0, 1, &Sequential), Err(Error::SpdViolation { .. })));
}
