//! Normalized functionals `F_k = ∫ v^(2k) dvol / V^{(n−2k)/n}` on conformal
//! families over the flat torus `[0, 2π)^n`, and their first variations.
//!
//! Metrics depend only on the first `d` coordinates. Integrals use the
//! uniform-grid trapezoid rule on those and an exact `2π` factor for each of
//! the others.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::catalog::{perturbed_in, MetricTerm, TrigMode, TrigPolynomial};
use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::invariants;
use crate::jet::JetSpace;
use crate::tensor::cholesky;

/// Largest number of active coordinates.
pub const MAX_ACTIVE_DIMS: usize = 3;

/// Default grid points per active coordinate.
pub const DEFAULT_GRID: usize = 48;

/// Default central-difference step.
pub const DEFAULT_EPS: f64 = 1e-3;

/// `g_t = e^{2(w + tφ)}(δ + Σ terms)` on `T^n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TorusMetricSpec {
    pub dim: usize,
    pub active_dims: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub perturbation: Vec<MetricTerm>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub log_factor: TrigPolynomial,
    #[cfg_attr(feature = "serde", serde(default))]
    pub direction: TrigPolynomial,
    #[cfg_attr(feature = "serde", serde(default = "default_grid"))]
    pub grid: usize,
}

#[cfg(feature = "serde")]
fn default_grid() -> usize {
    DEFAULT_GRID
}

impl TorusMetricSpec {
    pub fn flat(dim: usize, active_dims: usize, grid: usize) -> Self {
        TorusMetricSpec {
            dim,
            active_dims,
            perturbation: Vec::new(),
            log_factor: TrigPolynomial::zero(),
            direction: TrigPolynomial::zero(),
            grid,
        }
    }

    pub fn with_direction(&self, direction: TrigPolynomial) -> Self {
        TorusMetricSpec { direction, ..self.clone() }
    }

    pub fn nodes(&self) -> usize {
        self.grid.pow(self.active_dims as u32)
    }

    /// Chart point of grid node `idx`; inert coordinates sit at 0.
    pub fn node_point(&self, idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        let mut r = idx;
        for a in (0..self.active_dims).rev() {
            p[a] = TAU * (r % self.grid) as f64 / self.grid as f64;
            r /= self.grid;
        }
        p
    }

    fn check_frequencies(&self, freq: &[i32], what: &str) -> Result<()> {
        let limit = (self.grid / 4) as i32;
        for (a, k) in freq.iter().enumerate() {
            if *k == 0 {
                continue;
            }
            if a >= self.active_dims {
                return Err(Error::Shape(alloc::format!(
                    "{what}: frequency along inactive coordinate {a}"
                )));
            }
            if k.abs() > limit {
                return Err(Error::Shape(alloc::format!(
                    "{what}: frequency {k} exceeds grid/4 = {limit}"
                )));
            }
        }
        Ok(())
    }

    /// Shape and frequency checks, then positive definiteness of `δ + Σ terms`
    /// at every node.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if !(3..=8).contains(&n) {
            return Err(Error::Dimension { dim: n, reason: "torus families need 3 <= n <= 8" });
        }
        if self.active_dims == 0 || self.active_dims > MAX_ACTIVE_DIMS || self.active_dims > n {
            return Err(Error::Shape(alloc::format!(
                "active_dims {} must be in 1..={}",
                self.active_dims,
                MAX_ACTIVE_DIMS.min(n)
            )));
        }
        if self.grid < 4 {
            return Err(Error::Shape("grid needs at least 4 points".into()));
        }
        for t in &self.perturbation {
            if t.i >= n || t.j >= n {
                return Err(Error::Shape(alloc::format!("term ({}, {}) outside dimension {n}", t.i, t.j)));
            }
            self.check_frequencies(&t.freq, "perturbation")?;
        }
        for m in &self.log_factor.0 {
            self.check_frequencies(&m.freq, "log_factor")?;
        }
        for m in &self.direction.0 {
            self.check_frequencies(&m.freq, "direction")?;
        }
        for node in 0..self.nodes() {
            let p = self.node_point(node);
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                g[i * n + i] = 1.0;
            }
            for t in &self.perturbation {
                let v = TrigPolynomial(vec![TrigMode { amplitude: t.amplitude, freq: t.freq.clone(), phase: t.phase }])
                    .eval(&p);
                g[t.i * n + t.j] += v;
                if t.i != t.j {
                    g[t.j * n + t.i] += v;
                }
            }
            if let Err(Error::SingularMetric { pivot }) = cholesky(&g, n) {
                return Err(Error::SpdViolation { node, pivot });
            }
        }
        Ok(())
    }

    /// Metric jet order needed for `v^(2k)`.
    fn order_for(k: usize) -> usize {
        if k >= 3 {
            4
        } else {
            2
        }
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > 3 {
            return Err(Error::Rank { k });
        }
        if self.dim < 2 * k {
            return Err(Error::Dimension { dim: self.dim, reason: "F_k needs n >= 2k" });
        }
        if k == 3 && self.dim < 5 {
            return Err(Error::Dimension { dim: self.dim, reason: "v6 needs n >= 5" });
        }
        Ok(())
    }
}

/// Values gathered at one quadrature node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeSample {
    /// `v^(2k)` of `g_t`.
    pub v: f64,
    /// `√det g_t`.
    pub density: f64,
    /// Direction `φ` at the node.
    pub phi: f64,
}

/// Evaluates independent node closures; results come back in index order.
pub trait GridExecutor {
    fn run(&self, count: usize, f: &(dyn Fn(usize) -> Result<NodeSample> + Sync)) -> Result<Vec<NodeSample>>;
}

/// Evaluates nodes one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl GridExecutor for Sequential {
    fn run(&self, count: usize, f: &(dyn Fn(usize) -> Result<NodeSample> + Sync)) -> Result<Vec<NodeSample>> {
        (0..count).map(f).collect()
    }
}

/// Fixed-shape pairwise sum, independent of how the terms were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len if len <= 8 => xs.iter().fold(0.0, |a, b| a + b),
        len => {
            let mid = len / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// `v^(2k)` of a bundle.
pub fn v_of(bundle: &CurvatureBundle, k: usize) -> Result<f64> {
    match k {
        1 => Ok(invariants::v2(bundle)),
        2 => invariants::v4(bundle),
        3 => invariants::v6(bundle),
        _ => Err(Error::Rank { k }),
    }
}

/// Samples `v^(2k)(g_t)`, `√det g_t` and `φ` on the grid.
pub fn sample_grid(spec: &TorusMetricSpec, t: f64, k: usize, exec: &dyn GridExecutor) -> Result<Vec<NodeSample>> {
    spec.check_k(k)?;
    let order = TorusMetricSpec::order_for(k);
    let space = JetSpace::new(spec.active_dims, order)?;
    let mut w = spec.log_factor.clone();
    if t != 0.0 {
        w.0.extend(spec.direction.scaled(t).0);
    }
    let node = |idx: usize| -> Result<NodeSample> {
        let p = spec.node_point(idx);
        let m = perturbed_in(&space, spec.dim, &p, &spec.perturbation, &w, order).map_err(|e| match e {
            Error::SingularMetric { pivot } => Error::SpdViolation { node: idx, pivot },
            other => other,
        })?;
        let bundle = CurvatureBundle::compute(&m)?;
        Ok(NodeSample { v: v_of(&bundle, k)?, density: m.volume_density()?, phi: spec.direction.eval(&p) })
    };
    exec.run(spec.nodes(), &node)
}

/// Cell volume of one node, including the inactive `2π` factors.
fn cell_weight(spec: &TorusMetricSpec) -> f64 {
    let h = TAU / spec.grid as f64;
    libm::pow(h, spec.active_dims as f64) * libm::pow(TAU, (spec.dim - spec.active_dims) as f64)
}

/// `∫ f dvol` for per-node values `f`.
pub fn integrate(spec: &TorusMetricSpec, samples: &[NodeSample], f: impl Fn(&NodeSample) -> f64) -> f64 {
    let terms: Vec<f64> = samples.iter().map(|s| f(s) * s.density).collect();
    cell_weight(spec) * pairwise_sum(&terms)
}

/// Trapezoid rule for a plain function of the active coordinates (no volume density).
pub fn integrate_flat(spec: &TorusMetricSpec, f: impl Fn(&[f64]) -> f64) -> f64 {
    let terms: Vec<f64> = (0..spec.nodes()).map(|i| f(&spec.node_point(i))).collect();
    cell_weight(spec) * pairwise_sum(&terms)
}

fn normalization_exponent(n: usize, k: usize) -> f64 {
    (n as f64 - 2.0 * k as f64) / n as f64
}

fn fk_from_samples(spec: &TorusMetricSpec, samples: &[NodeSample], k: usize) -> f64 {
    let total = integrate(spec, samples, |s| s.v);
    let vol = integrate(spec, samples, |_| 1.0);
    total / libm::pow(vol, normalization_exponent(spec.dim, k))
}

/// `F_k(g_t)`.
pub fn functional_fk(spec: &TorusMetricSpec, t: f64, k: usize, exec: &dyn GridExecutor) -> Result<f64> {
    let samples = sample_grid(spec, t, k, exec)?;
    Ok(fk_from_samples(spec, &samples, k))
}

/// `(F_k(ε) − F_k(−ε)) / 2ε`.
pub fn first_variation_fd(spec: &TorusMetricSpec, k: usize, eps: f64, exec: &dyn GridExecutor) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(alloc::format!("step {eps} must be positive")));
    }
    let plus = functional_fk(spec, eps, k, exec)?;
    let minus = functional_fk(spec, -eps, k, exec)?;
    Ok((plus - minus) / (2.0 * eps))
}

fn analytic_from_samples(spec: &TorusMetricSpec, samples: &[NodeSample], k: usize) -> f64 {
    let n = spec.dim;
    if n == 2 * k {
        return 0.0;
    }
    let vol = integrate(spec, samples, |_| 1.0);
    let total = integrate(spec, samples, |s| s.v);
    let mean = total / vol;
    let weighted = integrate(spec, samples, |s| (s.v - mean) * s.phi);
    (n as f64 - 2.0 * k as f64) / libm::pow(vol, normalization_exponent(n, k)) * weighted
}

/// `(n−2k) V^{2k/n − 1} ∫ (v^(2k) − v̄) φ dvol` at `t = 0`, with `v̄` the volume mean.
pub fn first_variation_analytic(spec: &TorusMetricSpec, k: usize, exec: &dyn GridExecutor) -> Result<f64> {
    let samples = sample_grid(spec, 0.0, k, exec)?;
    Ok(analytic_from_samples(spec, &samples, k))
}

/// `max |v^(2k) − v̄|` over the grid at `t = 0`.
pub fn euler_lagrange_residual(spec: &TorusMetricSpec, k: usize, exec: &dyn GridExecutor) -> Result<f64> {
    let samples = sample_grid(spec, 0.0, k, exec)?;
    Ok(residual_from_samples(spec, &samples))
}

fn residual_from_samples(spec: &TorusMetricSpec, samples: &[NodeSample]) -> f64 {
    let mean = integrate(spec, samples, |s| s.v) / integrate(spec, samples, |_| 1.0);
    samples.iter().fold(0.0, |m, s| libm::fmax(m, libm::fabs(s.v - mean)))
}

/// Band-limited steepest-descent direction `ψ = −Π[(v − v̄)√det g]`, where `Π`
/// keeps Fourier modes with every `|k_a| <= grid/4`.
///
/// With this choice `∫ (v − v̄) ψ dvol = −‖Π[(v − v̄)√det g]‖²` in the flat
/// `L²` norm, so `ψ` is a descent direction for `F_k` whenever `n ≠ 2k`.
pub fn descent_direction(spec: &TorusMetricSpec, samples: &[NodeSample]) -> TrigPolynomial {
    let d = spec.active_dims;
    let m = spec.grid;
    let limit = (m / 4) as i32;
    let mean = integrate(spec, samples, |s| s.v) / integrate(spec, samples, |_| 1.0);
    let f: Vec<f64> = samples.iter().map(|s| (s.v - mean) * s.density).collect();
    let points: Vec<Vec<f64>> = (0..samples.len()).map(|i| spec.node_point(i)).collect();
    let mut modes = Vec::new();
    let side = (2 * limit + 1) as usize;
    let mut freq = vec![0i32; d];
    for code in 0..side.pow(d as u32) {
        let mut r = code;
        for a in (0..d).rev() {
            freq[a] = (r % side) as i32 - limit;
            r /= side;
        }
        // one representative per ±k pair, skipping k = 0
        match freq.iter().find(|k| **k != 0) {
            Some(k) if *k > 0 => {}
            _ => continue,
        }
        let (mut re, mut im) = (0.0, 0.0);
        let mut re_terms = Vec::with_capacity(f.len());
        let mut im_terms = Vec::with_capacity(f.len());
        for (fx, p) in f.iter().zip(&points) {
            let arg: f64 = freq.iter().zip(p).map(|(k, x)| *k as f64 * x).sum();
            re_terms.push(fx * libm::cos(arg));
            im_terms.push(-fx * libm::sin(arg));
        }
        re += pairwise_sum(&re_terms) / f.len() as f64;
        im += pairwise_sum(&im_terms) / f.len() as f64;
        let amp = 2.0 * libm::sqrt(re * re + im * im);
        if amp == 0.0 {
            continue;
        }
        let mut full = vec![0i32; spec.dim];
        full[..d].copy_from_slice(&freq);
        modes.push(TrigMode { amplitude: -amp, freq: full, phase: libm::atan2(im, re) });
    }
    TrigPolynomial(modes)
}

/// One gradient step along [`descent_direction`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DescentReport {
    pub k: usize,
    pub step: f64,
    pub f_before: f64,
    pub f_after: f64,
    /// `step × DF_k[ψ]` from the analytic first variation.
    pub predicted_change: f64,
    pub residual_before: f64,
    pub residual_after: f64,
}

impl DescentReport {
    /// `F_k` went down and the first-order prediction was negative.
    pub fn descends(&self) -> bool {
        self.predicted_change < 0.0 && self.f_after < self.f_before
    }
}

/// Takes one step of size `step` along the band-limited descent direction,
/// normalized to unit max amplitude.
pub fn descent_step(spec: &TorusMetricSpec, k: usize, step: f64, exec: &dyn GridExecutor) -> Result<DescentReport> {
    let before = sample_grid(spec, 0.0, k, exec)?;
    let psi = descent_direction(spec, &before);
    let scale = psi.0.iter().map(|m| libm::fabs(m.amplitude)).fold(0.0, f64::max);
    let psi = if scale > 0.0 { psi.scaled(1.0 / scale) } else { psi };
    let moved = spec.with_direction(psi);
    let with_phi: Vec<NodeSample> = before
        .iter()
        .enumerate()
        .map(|(i, s)| NodeSample { phi: moved.direction.eval(&moved.node_point(i)), ..*s })
        .collect();
    let after = sample_grid(&moved, step, k, exec)?;
    Ok(DescentReport {
        k,
        step,
        f_before: fk_from_samples(spec, &before, k),
        f_after: fk_from_samples(&moved, &after, k),
        predicted_change: step * analytic_from_samples(&moved, &with_phi, k),
        residual_before: residual_from_samples(spec, &before),
        residual_after: residual_from_samples(&moved, &after),
    })
}

/// One row of an ε-sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub eps: f64,
    pub fd: f64,
    pub abs_error: f64,
}

/// Finite-difference against analytic first variation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionalReport {
    pub k: usize,
    pub n: usize,
    pub grid: usize,
    pub active_dims: usize,
    pub eps: f64,
    pub f_value: f64,
    pub fd_derivative: f64,
    pub analytic_derivative: f64,
    pub abs_discrepancy: f64,
    pub rel_discrepancy: f64,
    pub sweep: Vec<SweepRow>,
}

impl FunctionalReport {
    /// `|fd − analytic| <= max(rel·|analytic|, abs)`.
    pub fn agrees(&self, rel: f64, abs: f64) -> bool {
        self.abs_discrepancy <= libm::fmax(rel * libm::fabs(self.analytic_derivative), abs)
    }

    /// `log₂` of successive error ratios for rows whose errors both exceed `floor`.
    /// Halving ε should give values near 2.
    pub fn observed_orders(&self, floor: f64) -> Vec<f64> {
        self.sweep
            .windows(2)
            .filter(|w| w[0].abs_error > floor && w[1].abs_error > floor)
            .map(|w| libm::log2(w[0].abs_error / w[1].abs_error) / libm::log2(w[0].eps / w[1].eps))
            .collect()
    }
}

/// Runs the analytic formula, the central difference at `eps`, and the
/// central difference at every step of `sweep`.
pub fn variation_report(
    spec: &TorusMetricSpec,
    k: usize,
    eps: f64,
    sweep: &[f64],
    exec: &dyn GridExecutor,
) -> Result<FunctionalReport> {
    let samples = sample_grid(spec, 0.0, k, exec)?;
    let f_value = fk_from_samples(spec, &samples, k);
    let analytic = analytic_from_samples(spec, &samples, k);
    let fd = first_variation_fd(spec, k, eps, exec)?;
    let mut rows = Vec::with_capacity(sweep.len());
    for &e in sweep {
        let v = if e == eps { fd } else { first_variation_fd(spec, k, e, exec)? };
        rows.push(SweepRow { eps: e, fd: v, abs_error: libm::fabs(v - analytic) });
    }
    let abs = libm::fabs(fd - analytic);
    Ok(FunctionalReport {
        k,
        n: spec.dim,
        grid: spec.grid,
        active_dims: spec.active_dims,
        eps,
        f_value,
        fd_derivative: fd,
        analytic_derivative: analytic,
        abs_discrepancy: abs,
        rel_discrepancy: if analytic != 0.0 { abs / libm::fabs(analytic) } else { abs },
        sweep: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_points_cover_grid() {
        let s = TorusMetricSpec::flat(5, 2, 8);
        assert_eq!(s.nodes(), 64);
        let p = s.node_point(9);
        assert_eq!(p.len(), 5);
        assert!((p[0] - TAU / 8.0).abs() < 1e-15 && (p[1] - TAU / 8.0).abs() < 1e-15);
        assert_eq!(&p[2..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn pairwise_sum_small() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = TorusMetricSpec::flat(5, 2, 16);
        s.direction = TrigPolynomial(vec![TrigMode { amplitude: 1.0, freq: vec![5, 0], phase: 0.0 }]);
        assert!(matches!(s.validate(), Err(Error::Shape(_))));
        s.direction = TrigPolynomial(vec![TrigMode { amplitude: 1.0, freq: vec![0, 0, 1], phase: 0.0 }]);
        assert!(matches!(s.validate(), Err(Error::Shape(_))));
        let mut s = TorusMetricSpec::flat(4, 1, 16);
        s.perturbation = vec![MetricTerm { i: 0, j: 0, amplitude: -1.5, freq: vec![1], phase: 0.0 }];
        assert!(matches!(s.validate(), Err(Error::SpdViolation { .. })));
        assert!(matches!(TorusMetricSpec::flat(9, 1, 16).validate(), Err(Error::Dimension { .. })));
    }
}
