//! First-variation experiments on torus families.

use confinv_core::variation::{
    euler_lagrange_residual, functional_fk, variation_report, FunctionalReport, GridExecutor, TorusMetricSpec,
};
use serde::Serialize;

use crate::error::{CliResult, Failure};

/// Steps of the ε-sweep, as multiples of `eps`.
pub const SWEEP_FACTORS: [f64; 4] = [8.0, 4.0, 2.0, 1.0];
/// Family parameters reported alongside the derivative.
pub const FAMILY_T: [f64; 3] = [0.0, 0.05, 0.1];
/// `|fd − analytic| <= max(REL_TOL·|analytic|, ABS_TOL)`.
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-8;
/// Allowed relative change of `F_k` over the family when `n = 2k`.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Accepted band for the observed convergence order.
pub const ORDER_BAND: (f64, f64) = (1.6, 2.4);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub t: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationOutput {
    pub report: FunctionalReport,
    pub family: Vec<FamilyPoint>,
    /// `max_t |F(t) − F(0)| / |F(0)|`, only for `n = 2k`.
    pub invariance_rel: Option<f64>,
    pub euler_lagrange_residual: f64,
    pub observed_orders: Vec<f64>,
    pub passed: bool,
}

/// Sweep rows whose error is within this of zero are at the roundoff floor of
/// the central difference and carry no order information.
pub fn roundoff_floor(report: &FunctionalReport) -> f64 {
    let eps_min = report.sweep.iter().map(|r| r.eps).fold(f64::INFINITY, f64::min);
    64.0 * f64::EPSILON * report.f_value.abs().max(1e-300) / eps_min
}

pub fn orders_ok(orders: &[f64]) -> bool {
    orders.iter().all(|o| (ORDER_BAND.0..=ORDER_BAND.1).contains(o))
}

pub fn invariance(family: &[FamilyPoint]) -> f64 {
    let f0 = family[0].f;
    let spread = family.iter().fold(0.0f64, |m, p| m.max((p.f - f0).abs()));
    if spread == 0.0 {
        0.0
    } else {
        spread / f0.abs()
    }
}

pub fn run(
    spec: &TorusMetricSpec,
    k: usize,
    eps: f64,
    with_sweep: bool,
    exec: &dyn GridExecutor,
) -> CliResult<VariationOutput> {
    let sweep: Vec<f64> = if with_sweep { SWEEP_FACTORS.iter().map(|s| s * eps).collect() } else { Vec::new() };
    let report = variation_report(spec, k, eps, &sweep, exec).map_err(Failure::at_compute)?;
    let critical = spec.dim == 2 * k;
    let family = if critical {
        let mut pts = vec![FamilyPoint { t: 0.0, f: report.f_value }];
        for &t in &FAMILY_T[1..] {
            pts.push(FamilyPoint { t, f: functional_fk(spec, t, k, exec).map_err(Failure::at_compute)? });
        }
        pts
    } else {
        vec![FamilyPoint { t: 0.0, f: report.f_value }]
    };
    let invariance_rel = if critical { Some(invariance(&family)) } else { None };
    let residual = euler_lagrange_residual(spec, k, exec).map_err(Failure::at_compute)?;
    let observed_orders = report.observed_orders(roundoff_floor(&report));
    let passed = report.agrees(REL_TOL, ABS_TOL)
        && orders_ok(&observed_orders)
        && invariance_rel.map_or(true, |r| r <= INVARIANCE_TOL);
    Ok(VariationOutput { report, family, invariance_rel, euler_lagrange_residual: residual, observed_orders, passed })
}
