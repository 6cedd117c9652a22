//! Closed-form metric families in a single chart.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::ExpressionTree;
use crate::jet::{Jet, JetSpace, MAX_ORDER};
use crate::metric::MetricJet;

/// One term `amplitude · cos(k·x + phase)` added to `g_ij` (and `g_ji`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricTerm {
    pub i: usize,
    pub j: usize,
    pub amplitude: f64,
    pub freq: Vec<i32>,
    pub phase: f64,
}

/// One Fourier mode `amplitude · cos(k·x + phase)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigMode {
    pub amplitude: f64,
    pub freq: Vec<i32>,
    pub phase: f64,
}

/// Finite sum of [`TrigMode`]s.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct TrigPolynomial(pub Vec<TrigMode>);

fn phase_arg(freq: &[i32], phase: f64, point: &[f64]) -> f64 {
    phase + freq.iter().zip(point).map(|(k, x)| *k as f64 * x).sum::<f64>()
}

/// Jet of `amplitude · cos(k·x + phase)`.
pub fn cosine_jet(
    space: &Arc<JetSpace>,
    point: &[f64],
    order: usize,
    amplitude: f64,
    freq: &[i32],
    phase: f64,
) -> Result<Jet> {
    let mut coeffs = alloc::vec![0.0; space.len(order)];
    coeffs[0] = phase_arg(freq, phase, point);
    for (a, k) in freq.iter().enumerate() {
        if *k == 0 {
            continue;
        }
        if a >= space.n_vars() {
            return Err(Error::Shape(alloc::format!(
                "frequency along coordinate {a} but only {} active coordinates",
                space.n_vars()
            )));
        }
        if order >= 1 {
            coeffs[1 + a] = *k as f64;
        }
    }
    Ok(Jet::from_coeffs(space, order, coeffs)?.cos().scale(amplitude))
}

impl TrigPolynomial {
    pub fn zero() -> Self {
        TrigPolynomial(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        TrigPolynomial(alloc::vec![TrigMode { amplitude: c, freq: Vec::new(), phase: 0.0 }])
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0.iter().map(|m| m.amplitude * libm::cos(phase_arg(&m.freq, m.phase, point))).sum()
    }

    pub fn jet_in(&self, space: &Arc<JetSpace>, point: &[f64], order: usize) -> Result<Jet> {
        let mut acc = Jet::zeros(space, order)?;
        for m in &self.0 {
            acc = acc.try_add(&cosine_jet(space, point, order, m.amplitude, &m.freq, m.phase)?)?;
        }
        Ok(acc)
    }

    pub fn max_frequency(&self) -> i32 {
        self.0.iter().flat_map(|m| m.freq.iter().map(|k| k.abs())).max().unwrap_or(0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        TrigPolynomial(self.0.iter().map(|m| TrigMode { amplitude: a * m.amplitude, ..m.clone() }).collect())
    }
}

fn check_dim(n: usize, point: &[f64]) -> Result<()> {
    if !(3..=8).contains(&n) {
        return Err(Error::Dimension { dim: n, reason: "catalog metrics need 3 <= n <= 8" });
    }
    if point.len() != n {
        return Err(Error::Shape(alloc::format!("point has {} coordinates, expected {n}", point.len())));
    }
    Ok(())
}

fn diagonal(n: usize, point: &[f64], factor: ExpressionTree) -> Result<MetricJet> {
    let space = JetSpace::new(n, MAX_ORDER)?;
    let f = factor.jet_in(&space, point, MAX_ORDER)?;
    let zero = Jet::zeros(&space, MAX_ORDER)?;
    MetricJet::from_components(n, point, &space, MAX_ORDER, |i, j| {
        Ok(if i == j { f.clone() } else { zero.clone() })
    })
}

/// Euclidean metric `δ`.
pub fn flat(n: usize, point: &[f64]) -> Result<MetricJet> {
    check_dim(n, point)?;
    diagonal(n, point, ExpressionTree::constant(1.0))
}

/// Round unit sphere in stereographic coordinates, `4(1+|x|²)^{-2} δ`.
pub fn sphere_stereographic(n: usize, point: &[f64]) -> Result<MetricJet> {
    check_dim(n, point)?;
    let conf = ExpressionTree::sum(alloc::vec![
        ExpressionTree::constant(1.0),
        ExpressionTree::radius_squared(n)
    ])
    .pow(-2.0)
    .scaled(4.0);
    diagonal(n, point, conf)
}

/// Poincaré ball, `4(1−|x|²)^{-2} δ` for `|x| < 1`.
pub fn hyperbolic_ball(n: usize, point: &[f64]) -> Result<MetricJet> {
    check_dim(n, point)?;
    let r2: f64 = point.iter().map(|x| x * x).sum();
    if r2 >= 1.0 {
        return Err(Error::Domain(alloc::format!("|x|² = {r2} outside the unit ball chart")));
    }
    let conf = ExpressionTree::sum(alloc::vec![
        ExpressionTree::constant(1.0),
        ExpressionTree::radius_squared(n).scaled(-1.0)
    ])
    .pow(-2.0)
    .scaled(4.0);
    diagonal(n, point, conf)
}

/// `e^{2w} δ` for an expression `w`.
pub fn conformally_flat(n: usize, point: &[f64], w: &ExpressionTree) -> Result<MetricJet> {
    check_dim(n, point)?;
    diagonal(n, point, w.clone().scaled(2.0).exp())
}

/// `δ + Σ terms`, with jets in all `n` coordinates.
pub fn perturbed_flat(n: usize, point: &[f64], terms: &[MetricTerm]) -> Result<MetricJet> {
    check_dim(n, point)?;
    let space = JetSpace::new(n, MAX_ORDER)?;
    perturbed_in(&space, n, point, terms, &TrigPolynomial::zero(), MAX_ORDER)
}

/// `e^{2w}(δ + Σ terms)` with jets over the variables of `space` (which may be
/// fewer than `n`).
pub fn perturbed_in(
    space: &Arc<JetSpace>,
    n: usize,
    point: &[f64],
    terms: &[MetricTerm],
    log_factor: &TrigPolynomial,
    order: usize,
) -> Result<MetricJet> {
    for t in terms {
        if t.i >= n || t.j >= n {
            return Err(Error::Shape(alloc::format!("term ({}, {}) outside dimension {n}", t.i, t.j)));
        }
    }
    let w = log_factor.jet_in(space, point, order)?;
    let factor = if log_factor.0.is_empty() { None } else { Some(w.scale(2.0).exp()) };
    MetricJet::from_components(n, point, space, order, |i, j| {
        let mut c = Jet::constant(space, order, if i == j { 1.0 } else { 0.0 })?;
        for t in terms {
            if (t.i == i && t.j == j) || (t.i == j && t.j == i) {
                c = c.try_add(&cosine_jet(space, point, order, t.amplitude, &t.freq, t.phase)?)?;
            }
        }
        match &factor {
            Some(f) => c.try_mul(f),
            None => Ok(c),
        }
    })
}
