#![allow(dead_code)]

use confinv_core::catalog::{MetricTerm, TrigMode, TrigPolynomial};
use confinv_core::expr::ExpressionTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// δ + Σ a·cos(k·x + φ) with |a| ≤ 0.1 and |k_i| ≤ 3 on a few coordinates.
pub fn random_terms(rng: &mut ChaCha8Rng, n: usize, n_terms: usize) -> Vec<MetricTerm> {
    random_terms_with(rng, n, n_terms, 3)
}

pub fn random_terms_with(rng: &mut ChaCha8Rng, n: usize, n_terms: usize, max_freq: i32) -> Vec<MetricTerm> {
    (0..n_terms)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            let freq = (0..n)
                .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-max_freq..=max_freq) } else { 0 })
                .collect();
            MetricTerm {
                i,
                j,
                amplitude: rng.gen_range(-0.1..0.1),
                freq,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect()
}

pub fn random_trig(rng: &mut ChaCha8Rng, n: usize, modes: usize, amp: f64) -> TrigPolynomial {
    TrigPolynomial(
        (0..modes)
            .map(|_| TrigMode {
                amplitude: rng.gen_range(-amp..amp),
                freq: (0..n).map(|_| rng.gen_range(-2..=2)).collect(),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect(),
    )
}

/// Random smooth scalar expression: Σ a·sin(k·x + c) + b·x_i x_j.
pub fn random_factor(rng: &mut ChaCha8Rng, n: usize) -> ExpressionTree {
    let mut terms = Vec::new();
    for _ in 0..3 {
        let mut parts: Vec<ExpressionTree> =
            (0..n).map(|i| ExpressionTree::coord(i).scaled(rng.gen_range(-1.5..1.5))).collect();
        parts.push(ExpressionTree::constant(rng.gen_range(0.0..6.0)));
        let arg = ExpressionTree::sum(parts);
        terms.push(arg.sin().scaled(rng.gen_range(-0.2..0.2)));
    }
    let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
    terms.push(ExpressionTree::product(vec![ExpressionTree::coord(i), ExpressionTree::coord(j)]).scaled(rng.gen_range(-0.1..0.1)));
    ExpressionTree::sum(terms)
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-radius..radius)).collect()
}

/// Values of δ + Σ terms at `x`, row-major.
pub fn metric_values(n: usize, terms: &[MetricTerm], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = 1.0;
    }
    for t in terms {
        let arg: f64 = t.phase + t.freq.iter().zip(x).map(|(k, xi)| *k as f64 * xi).sum::<f64>();
        let v = t.amplitude * arg.cos();
        g[t.i * n + t.j] += v;
        if t.i != t.j {
            g[t.j * n + t.i] += v;
        }
    }
    g
}

const D1: [(f64, f64); 6] =
    [(-3.0, -1.0 / 60.0), (-2.0, 9.0 / 60.0), (-1.0, -45.0 / 60.0), (1.0, 45.0 / 60.0), (2.0, -9.0 / 60.0), (3.0, 1.0 / 60.0)];
const D2: [(f64, f64); 7] = [
    (-3.0, 2.0 / 180.0),
    (-2.0, -27.0 / 180.0),
    (-1.0, 270.0 / 180.0),
    (0.0, -490.0 / 180.0),
    (1.0, 270.0 / 180.0),
    (2.0, -27.0 / 180.0),
    (3.0, 2.0 / 180.0),
];

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut p = x.to_vec();
    for (a, d) in moves {
        p[*a] += d;
    }
    p
}

fn accumulate(acc: &mut Vec<f64>, v: Vec<f64>, w: f64) {
    if acc.is_empty() {
        acc.resize(v.len(), 0.0);
    }
    for (o, x) in acc.iter_mut().zip(v) {
        *o += w * x;
    }
}

/// Sixth-order central difference `∂_a f` of a vector-valued function.
pub fn fd_first(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], a: usize, h: f64) -> Vec<f64> {
    let mut acc = Vec::new();
    for (o, w) in D1 {
        accumulate(&mut acc, f(&shifted(x, &[(a, o * h)])), w / h);
    }
    acc
}

/// Sixth-order central difference `∂_a∂_b f`.
pub fn fd_second(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], a: usize, b: usize, h: f64) -> Vec<f64> {
    let mut acc = Vec::new();
    if a == b {
        for (o, w) in D2 {
            accumulate(&mut acc, f(&shifted(x, &[(a, o * h)])), w / (h * h));
        }
    } else {
        for (oa, wa) in D1 {
            for (ob, wb) in D1 {
                accumulate(&mut acc, f(&shifted(x, &[(a, oa * h), (b, ob * h)])), wa * wb / (h * h));
            }
        }
    }
    acc
}
