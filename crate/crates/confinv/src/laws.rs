//! Randomized trials of the pointwise laws.

use confinv_core::conformal::{
    bach_law_rhs, relative_residual, rescale, schouten_law_rhs, weyl_covariance_check, ConformalFactor,
    RESIDUAL_FLOOR,
};
use confinv_core::invariants::{newton_divergence, newton_divergence_scale, sigma_k, v_invariants};
use confinv_core::{CurvatureBundle, ExpressionTree as E, MetricJet};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliResult, Failure};
use crate::exec::Parallel;
use crate::random;
use crate::spec_file::{expr_to_json, MetricKind, MetricSpecFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Schouten,
    Bach,
    Weyl,
    NewtonDiv,
    Lcf,
}

impl Law {
    pub fn name(self) -> &'static str {
        match self {
            Law::Schouten => "schouten",
            Law::Bach => "bach",
            Law::Weyl => "weyl",
            Law::NewtonDiv => "newton-div",
            Law::Lcf => "lcf",
        }
    }

    /// Check names and tolerances, in the order trials report them.
    pub fn checks(self) -> &'static [(&'static str, f64)] {
        match self {
            Law::Schouten => &[("schouten_residual", 1e-8)],
            Law::Bach => &[("bach_residual", 1e-7)],
            Law::Weyl => &[("weyl_residual", 1e-9)],
            Law::NewtonDiv => &[("newton_divergence_residual", 1e-8)],
            Law::Lcf => &[("weyl_over_riemann", 1e-9), ("bach_norm", 1e-8), ("v_minus_sigma", 1e-8)],
        }
    }

    fn uses_factor(self) -> bool {
        matches!(self, Law::Schouten | Law::Bach | Law::Weyl)
    }

    fn label(self) -> u32 {
        self as u32 + 1
    }
}

/// Where the trial metrics come from.
#[derive(Debug, Clone)]
pub enum Family {
    /// `δ + Σ trig terms` at random points.
    Perturbed,
    /// `e^{2w}δ` with random `w` at random points.
    ConformallyFlat,
    /// One catalog family at random points.
    Fixed(MetricSpecFile),
}

#[derive(Debug, Clone)]
pub struct LawRequest {
    pub law: Law,
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub family: Family,
    /// Negative control: flips the sign of the predicted side.
    pub corrupt_sign: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckStat {
    pub name: String,
    pub tolerance: f64,
    pub max: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawReport {
    pub law: Law,
    pub dims: Vec<usize>,
    pub trials_per_dim: usize,
    pub seed: u64,
    pub corrupted: bool,
    pub checks: Vec<CheckStat>,
    pub passed: bool,
    /// The trial with the largest residual-to-tolerance ratio.
    pub worst: Value,
}

struct Trial {
    spec: MetricSpecFile,
    phi: Option<E>,
}

fn draw(req: &LawRequest, n: usize, index: usize) -> CliResult<Trial> {
    let mut rng = random::stream(req.seed, req.law.label() * 16 + n as u32, index as u32);
    let family = match (&req.family, req.law) {
        (Family::Perturbed, Law::Lcf) => &Family::ConformallyFlat,
        (f, _) => f,
    };
    let spec = match family {
        Family::Perturbed => {
            let point = random::chart_point(&mut rng, n, 1.0);
            let terms = random::metric_terms(&mut rng, n, 8, &point);
            MetricSpecFile {
                kind: MetricKind::PerturbedFlat,
                dim: n,
                point,
                params: serde_json::to_value(terms).expect("terms serialize"),
                seed: Some(req.seed),
            }
        }
        Family::ConformallyFlat => {
            let point = random::chart_point(&mut rng, n, 1.0);
            let w = random::scalar_function(&mut rng, n);
            MetricSpecFile { kind: MetricKind::ConformallyFlat, dim: n, point, params: expr_to_json(&w), seed: Some(req.seed) }
        }
        Family::Fixed(base) => {
            if base.kind == MetricKind::TorusFamily {
                return Err(Failure::Input("laws need a point metric family, not torus_family".into()));
            }
            if req.law == Law::Lcf && !matches!(base.kind, MetricKind::ConformallyFlat | MetricKind::Flat | MetricKind::SphereStereographic | MetricKind::HyperbolicBall) {
                return Err(Failure::Input("the lcf law needs a conformally flat family".into()));
            }
            let point = random::chart_point(&mut rng, n, 0.3);
            MetricSpecFile { point, seed: Some(req.seed), ..base.clone() }
        }
    };
    let phi = if req.law.uses_factor() { Some(random::scalar_function(&mut rng, n)) } else { None };
    Ok(Trial { spec, phi })
}

fn bundle(m: &MetricJet) -> CliResult<CurvatureBundle> {
    CurvatureBundle::compute(m).map_err(Failure::at_compute)
}

fn weyl_residual(m: &MetricJet, phi: &ConformalFactor, sign: f64) -> CliResult<f64> {
    if sign > 0.0 {
        return weyl_covariance_check(m, phi).map_err(Failure::at_compute);
    }
    let base = bundle(m)?;
    let direct = bundle(&rescale(m, phi).map_err(Failure::at_compute)?)?;
    let expected = base.weyl.scaled((-2.0 * phi.value()).exp());
    let diff = direct.weyl.max_diff(&expected).map_err(Failure::at_compute)?;
    Ok(diff / expected.max_norm().max(direct.weyl.max_norm()).max(RESIDUAL_FLOOR))
}

/// Residuals of one trial, one per check of the law.
fn residuals(law: Law, m: &MetricJet, phi: Option<&E>, corrupt: bool) -> CliResult<Vec<f64>> {
    let sign = if corrupt { -1.0 } else { 1.0 };
    let factor = match phi {
        Some(e) => Some(ConformalFactor::for_metric(e.clone(), m).map_err(Failure::at_compute)?),
        None => None,
    };
    match law {
        Law::Schouten | Law::Bach => {
            let phi = factor.as_ref().expect("factor drawn");
            let base = bundle(m)?;
            let direct = bundle(&rescale(m, phi).map_err(Failure::at_compute)?)?;
            let predicted = ConformalFactor::from_jet(phi.jet().scale(sign));
            let r = if law == Law::Schouten {
                relative_residual(&direct.schouten, &schouten_law_rhs(&base, &predicted).map_err(Failure::at_compute)?)
            } else {
                let b = direct.bach_or_err().map_err(Failure::at_compute)?;
                relative_residual(b, &bach_law_rhs(&base, &predicted).map_err(Failure::at_compute)?)
            };
            Ok(vec![r.map_err(Failure::at_compute)?])
        }
        Law::Weyl => Ok(vec![weyl_residual(m, factor.as_ref().expect("factor drawn"), sign)?]),
        Law::NewtonDiv => {
            let b = bundle(m)?;
            let (lhs, rhs) = newton_divergence(&b).map_err(Failure::at_compute)?;
            let scale = lhs.iter().chain(&rhs).fold(newton_divergence_scale(&b).max(RESIDUAL_FLOOR), |s, x| s.max(x.abs()));
            let diff = lhs.iter().zip(&rhs).fold(0.0f64, |d, (l, r)| d.max((l - sign * r).abs()));
            Ok(vec![diff / scale])
        }
        Law::Lcf => {
            let b = bundle(m)?;
            let rm = b.riemann.max_norm();
            let ratio = if rm > 0.0 { b.weyl.max_norm() / rm } else { 0.0 };
            let bach = b.bach_or_err().map_err(Failure::at_compute)?.max_norm();
            let v = v_invariants(&b).map_err(Failure::at_compute)?;
            let vs = [Some(v.v2), Some(v.v4), v.v6];
            let mut worst = 0.0f64;
            for (l, vl) in vs.iter().enumerate() {
                let Some(vl) = vl else { continue };
                let s = sigma_k(&b.schouten, &b.metric_inv, l + 1).map_err(Failure::at_compute)?;
                worst = worst.max((vl - sign * (-2.0f64).powi(-(l as i32 + 1)) * s).abs());
            }
            Ok(vec![ratio, bach, worst])
        }
    }
}

/// Runs `trials` trials per dimension and aggregates the maxima.
pub fn run(req: &LawRequest, exec: &Parallel) -> CliResult<LawReport> {
    if req.trials == 0 {
        return Err(Failure::Input("--trials must be positive".into()));
    }
    let min_dim = match req.law {
        Law::Schouten => 3,
        Law::NewtonDiv => 3,
        Law::Weyl | Law::Bach => 4,
        Law::Lcf => 5,
    };
    if let Some(n) = req.dims.iter().find(|n| **n < min_dim) {
        return Err(Failure::Input(format!("law {} needs n >= {min_dim}, got {n}", req.law.name())));
    }
    let jobs: Vec<(usize, usize)> = req.dims.iter().flat_map(|n| (0..req.trials).map(move |t| (*n, t))).collect();
    let results = exec.map(jobs.len(), |j| -> CliResult<(Trial, Vec<f64>)> {
        let (n, t) = jobs[j];
        let trial = draw(req, n, t)?;
        let m = trial.spec.metric()?;
        let r = residuals(req.law, &m, trial.phi.as_ref(), req.corrupt_sign)?;
        Ok((trial, r))
    });
    let checks = req.law.checks();
    let mut maxima = vec![0.0f64; checks.len()];
    let mut worst: Option<(f64, usize)> = None;
    let mut done = Vec::with_capacity(results.len());
    for (j, r) in results.into_iter().enumerate() {
        let (trial, res) = r?;
        let mut ratio = 0.0f64;
        for (c, v) in res.iter().enumerate() {
            maxima[c] = maxima[c].max(*v);
            ratio = ratio.max(v / checks[c].1);
        }
        if worst.map_or(true, |(w, _)| ratio > w) {
            worst = Some((ratio, j));
        }
        done.push(trial);
    }
    let checks: Vec<CheckStat> = checks
        .iter()
        .zip(&maxima)
        .map(|((name, tol), max)| CheckStat { name: (*name).into(), tolerance: *tol, max: *max, passed: max <= tol })
        .collect();
    let worst = worst.map_or(Value::Null, |(_, j)| {
        let t = &done[j];
        json!({
            "dim": jobs[j].0,
            "trial": jobs[j].1,
            "metric": t.spec,
            "phi": t.phi.as_ref().map(expr_to_json),
        })
    });
    Ok(LawReport {
        law: req.law,
        dims: req.dims.clone(),
        trials_per_dim: req.trials,
        seed: req.seed,
        corrupted: req.corrupt_sign,
        passed: checks.iter().all(|c| c.passed),
        checks,
        worst,
    })
}
