//! Single-point curvature and invariant report.

use confinv_core::invariants::{newton_divergence, newton_divergence_scale, InvariantSet};
use confinv_core::tensor::riemann_symmetry_defect;
use confinv_core::{CurvatureBundle, PointTensor};
use serde::Serialize;

use crate::error::{CliResult, Failure};
use crate::laws::CheckStat;
use crate::spec_file::MetricSpecFile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Norms {
    pub christoffel: f64,
    pub riemann: f64,
    pub ricci: f64,
    pub schouten: f64,
    pub weyl: f64,
    pub cotton: Option<f64>,
    pub bach: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionRoute {
    pub tr_c4: f64,
    pub v2: f64,
    pub v4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// Contravariant, row by row.
    pub newton: Vec<Vec<f64>>,
    pub v2: f64,
    pub v4: f64,
    pub v6: Option<f64>,
    pub expansion: Option<ExpansionRoute>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub spec: MetricSpecFile,
    pub scalar_curvature: f64,
    pub j: f64,
    pub norms: Norms,
    pub invariants: Invariants,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckStat>>,
    pub passed: bool,
}

fn rows(t: &PointTensor) -> Vec<Vec<f64>> {
    let n = t.dim();
    (0..n).map(|i| (0..n).map(|j| t.at(i, j)).collect()).collect()
}

fn stat(name: &str, max: f64, tolerance: f64) -> CheckStat {
    CheckStat { name: name.into(), tolerance, max, passed: max <= tolerance }
}

fn rel(x: f64, scale: f64) -> f64 {
    x / scale.max(1e-12)
}

/// Largest `|g^{ab} T_{..a..b..}|` over the pair of slots `(s1, s2)` of a rank-4 tensor.
fn trace_defect(t: &PointTensor, ginv: &PointTensor, s1: usize, s2: usize) -> f64 {
    let n = t.dim();
    let free: Vec<usize> = (0..4).filter(|s| *s != s1 && *s != s2).collect();
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            let mut sum = 0.0;
            for a in 0..n {
                for c in 0..n {
                    let mut idx = [0usize; 4];
                    idx[s1] = a;
                    idx[s2] = c;
                    idx[free[0]] = p;
                    idx[free[1]] = q;
                    sum += ginv.at(a, c) * t.get(&idx);
                }
            }
            worst = worst.max(sum.abs());
        }
    }
    worst
}

fn pair_trace(t: &PointTensor, ginv: &PointTensor) -> f64 {
    let n = t.dim();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| ginv.at(i, j) * t.at(i, j)).sum()
}

fn asymmetry(t: &PointTensor) -> f64 {
    let n = t.dim();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).fold(0.0, |m, (i, j)| m.max((t.at(i, j) - t.at(j, i)).abs()))
}

fn checks(b: &CurvatureBundle, inv: &InvariantSet) -> CliResult<Vec<CheckStat>> {
    let rm = b.riemann.max_norm();
    let mut out = vec![
        stat("riemann_symmetry", rel(riemann_symmetry_defect(&b.riemann), rm), 1e-12),
        stat("weyl_symmetry", rel(riemann_symmetry_defect(&b.weyl), rm), 1e-12),
        stat("weyl_trace", rel(trace_defect(&b.weyl, &b.metric_inv, 0, 2), rm), 1e-10),
        stat("schouten_symmetry", rel(asymmetry(&b.schouten), b.schouten.max_norm()), 1e-12),
        stat("schouten_trace", rel((pair_trace(&b.schouten, &b.metric_inv) - b.j).abs(), b.j.abs().max(1.0)), 1e-11),
    ];
    if let Some(c) = &b.cotton {
        let n = b.dim;
        let mut anti = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    anti = anti.max((c.get(&[i, j, k]) + c.get(&[i, k, j])).abs());
                }
            }
        }
        out.push(stat("cotton_antisymmetry", rel(anti, c.max_norm()), 1e-10));
        let (lhs, rhs) = newton_divergence(b).map_err(Failure::at_compute)?;
        let scale = lhs.iter().chain(&rhs).fold(newton_divergence_scale(b), |m, x| m.max(x.abs()));
        let diff = lhs.iter().zip(&rhs).fold(0.0f64, |m, (l, r)| m.max((l - r).abs()));
        out.push(stat("newton_divergence", rel(diff, scale), 1e-8));
    }
    if let Some(bach) = &b.bach {
        let scale = bach.max_norm().max(1.0);
        out.push(stat("bach_symmetry", asymmetry(bach) / scale, 1e-9));
        out.push(stat("bach_trace", pair_trace(bach, &b.metric_inv).abs() / scale, 1e-8));
    }
    if let Some(fg) = &inv.fg {
        let target = inv.sigma2 / 4.0;
        out.push(stat("expansion_route_v4", rel((fg.v4 - target).abs(), target.abs()), 1e-9));
    }
    Ok(out)
}

pub fn report(spec: &MetricSpecFile, with_checks: bool) -> CliResult<PointReport> {
    let m = spec.metric()?;
    let b = CurvatureBundle::compute(&m).map_err(Failure::at_compute)?;
    let inv = InvariantSet::compute(&b).map_err(Failure::at_compute)?;
    let checks = if with_checks { Some(checks(&b, &inv)?) } else { None };
    let passed = checks.as_ref().map_or(true, |c| c.iter().all(|s| s.passed));
    Ok(PointReport {
        spec: spec.clone(),
        scalar_curvature: b.scalar,
        j: b.j,
        norms: Norms {
            christoffel: b.christoffel.max_norm(),
            riemann: b.riemann.max_norm(),
            ricci: b.ricci.max_norm(),
            schouten: b.schouten.max_norm(),
            weyl: b.weyl.max_norm(),
            cotton: b.cotton.as_ref().map(PointTensor::max_norm),
            bach: b.bach.as_ref().map(PointTensor::max_norm),
        },
        invariants: Invariants {
            sigma1: inv.sigma1,
            sigma2: inv.sigma2,
            sigma3: inv.sigma3,
            newton: rows(&inv.newton),
            v2: inv.v2,
            v4: inv.v4,
            v6: inv.v6,
            expansion: inv.fg.as_ref().map(|f| ExpansionRoute { tr_c4: f.tr_c4, v2: f.v2, v4: f.v4 }),
        },
        checks,
        passed,
    })
}
