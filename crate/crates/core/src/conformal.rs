//! Conformal rescaling `g ↦ e^{2φ} g` and the transformation laws of the
//! Schouten, Bach and Weyl tensors.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::expr::ExpressionTree;
use crate::jet::{Jet, JetSpace};
use crate::metric::MetricJet;
use crate::tensor::{PointTensor, SymmetryTag, Variance};

/// Absolute floor used by [`relative_residual`].
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Below this ratio `‖W‖/‖Rm‖` a metric is treated as conformally flat by
/// [`weyl_covariance_check`].
pub const LCF_WEYL_RATIO: f64 = 1e-9;

/// A conformal factor `φ` as a jet at the evaluation point.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    expr: Option<ExpressionTree>,
    jet: Jet,
}

impl ConformalFactor {
    /// Jet of `expr` in the variables of `space`.
    pub fn from_expression(
        expr: ExpressionTree,
        space: &Arc<JetSpace>,
        point: &[f64],
        order: usize,
    ) -> Result<Self> {
        let jet = expr.jet_in(space, point, order)?;
        Ok(ConformalFactor { expr: Some(expr), jet })
    }

    /// Factor for the chart and order of `m`.
    pub fn for_metric(expr: ExpressionTree, m: &MetricJet) -> Result<Self> {
        ConformalFactor::from_expression(expr, m.space(), m.point(), m.order())
    }

    pub fn from_jet(jet: Jet) -> Self {
        ConformalFactor { expr: None, jet }
    }

    pub fn expression(&self) -> Option<&ExpressionTree> {
        self.expr.as_ref()
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    pub fn value(&self) -> f64 {
        self.jet.value()
    }

    /// `φ_i` at the point; zero along inert coordinates.
    pub fn gradient(&self, dim: usize) -> Result<Vec<f64>> {
        let nv = self.jet.n_vars();
        let mut out = vec![0.0; dim];
        for (i, o) in out.iter_mut().enumerate().take(nv) {
            *o = self.jet.derivative(i)?.value();
        }
        Ok(out)
    }

    /// `∂_i∂_j φ` at the point.
    pub fn partial_hessian(&self, dim: usize) -> Result<Vec<f64>> {
        let nv = self.jet.n_vars();
        let mut out = vec![0.0; dim * dim];
        for i in 0..nv.min(dim) {
            let di = self.jet.derivative(i)?;
            for j in 0..nv.min(dim) {
                out[i * dim + j] = di.derivative(j)?.value();
            }
        }
        Ok(out)
    }

    pub fn sum(&self, other: &ConformalFactor) -> Result<ConformalFactor> {
        Ok(ConformalFactor::from_jet(self.jet.try_add(&other.jet)?))
    }
}

/// `e^{2φ} g` with jet products.
pub fn rescale(m: &MetricJet, phi: &ConformalFactor) -> Result<MetricJet> {
    let factor = phi.jet.scale(2.0).exp();
    m.scaled_by(&factor)
}

/// Covariant Hessian `∇_i∇_j φ = ∂_i∂_j φ − Γ^k_ij φ_k` with respect to the bundle's metric.
pub fn covariant_hessian(bundle: &CurvatureBundle, phi: &ConformalFactor) -> Result<PointTensor> {
    let n = bundle.dim;
    let d = phi.gradient(n)?;
    let h = phi.partial_hessian(n)?;
    Ok(PointTensor::covariant2(n, |i, j| {
        let mut v = h[i * n + j];
        for (k, dk) in d.iter().enumerate() {
            v -= bundle.christoffel.get(&[k, i, j]) * dk;
        }
        v
    })
    .with_symmetry(SymmetryTag::SymmetricPair))
}

fn raise_vector(ginv: &PointTensor, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|k| (0..n).map(|a| ginv.at(k, a) * v[a]).sum()).collect()
}

/// `P_ij − ∇_i∇_jφ + φ_iφ_j − ½|∇φ|² g_ij`, everything taken with the background metric.
pub fn schouten_law_rhs(bundle: &CurvatureBundle, phi: &ConformalFactor) -> Result<PointTensor> {
    let n = bundle.dim;
    let d = phi.gradient(n)?;
    let hess = covariant_hessian(bundle, phi)?;
    let up = raise_vector(&bundle.metric_inv, &d);
    let norm2: f64 = d.iter().zip(&up).map(|(a, b)| a * b).sum();
    Ok(PointTensor::covariant2(n, |i, j| {
        bundle.schouten.at(i, j) - hess.at(i, j) + d[i] * d[j] - 0.5 * norm2 * bundle.metric.at(i, j)
    })
    .with_symmetry(SymmetryTag::SymmetricPair))
}

/// `e^{−2φ}[B_ij − (n−4)(C_ikj + C_jki)φ^k − (n−4) W_kijl φ^k φ^l]`.
pub fn bach_law_rhs(bundle: &CurvatureBundle, phi: &ConformalFactor) -> Result<PointTensor> {
    let n = bundle.dim;
    if n <= 3 {
        return Err(Error::Dimension { dim: n, reason: "Bach tensor needs n >= 4" });
    }
    let b = bundle.bach_or_err()?;
    let c = bundle.cotton_or_err()?;
    let w = &bundle.weyl;
    let up = raise_vector(&bundle.metric_inv, &phi.gradient(n)?);
    let nf = n as f64 - 4.0;
    let scale = libm::exp(-2.0 * phi.value());
    let mut out = PointTensor::zeros(n, &[Variance::Co; 2]);
    for i in 0..n {
        for j in 0..n {
            let mut v = b.at(i, j);
            for k in 0..n {
                v -= nf * (c.get(&[i, k, j]) + c.get(&[j, k, i])) * up[k];
                for l in 0..n {
                    v -= nf * w.get(&[k, i, j, l]) * up[k] * up[l];
                }
            }
            out.set(&[i, j], scale * v);
        }
    }
    Ok(out.with_symmetry(SymmetryTag::SymmetricPair))
}

/// Max-norm difference relative to the larger side, with [`RESIDUAL_FLOOR`].
pub fn relative_residual(a: &PointTensor, b: &PointTensor) -> Result<f64> {
    let diff = a.max_diff(b)?;
    let scale = libm::fmax(libm::fmax(a.max_norm(), b.max_norm()), RESIDUAL_FLOOR);
    Ok(diff / scale)
}

/// Residual of the Schouten law: direct `P(e^{2φ}g)` against [`schouten_law_rhs`].
pub fn schouten_law_residual(m: &MetricJet, phi: &ConformalFactor) -> Result<f64> {
    let base = CurvatureBundle::compute(m)?;
    let direct = CurvatureBundle::compute(&rescale(m, phi)?)?;
    relative_residual(&direct.schouten, &schouten_law_rhs(&base, phi)?)
}

/// Residual of the Bach law: direct `B(e^{2φ}g)` against [`bach_law_rhs`].
pub fn bach_law_residual(m: &MetricJet, phi: &ConformalFactor) -> Result<f64> {
    let base = CurvatureBundle::compute(m)?;
    let direct = CurvatureBundle::compute(&rescale(m, phi)?)?;
    relative_residual(direct.bach_or_err()?, &bach_law_rhs(&base, phi)?)
}

/// `‖W(e^{2φ}g) − e^{2φ}W(g)‖ / ‖W(g)‖`.
///
/// Returns 0 when both metrics are conformally flat to [`LCF_WEYL_RATIO`]:
/// there `W` is pure roundoff and the ratio carries no information.
pub fn weyl_covariance_check(m: &MetricJet, phi: &ConformalFactor) -> Result<f64> {
    if m.dim() < 4 {
        return Err(Error::Dimension { dim: m.dim(), reason: "Weyl covariance needs n >= 4" });
    }
    let base = CurvatureBundle::compute(m)?;
    let direct = CurvatureBundle::compute(&rescale(m, phi)?)?;
    let w0 = base.weyl.max_norm();
    let w1 = direct.weyl.max_norm();
    let flat0 = w0 <= LCF_WEYL_RATIO * base.riemann.max_norm() || w0 == 0.0;
    let flat1 = w1 <= LCF_WEYL_RATIO * direct.riemann.max_norm() || w1 == 0.0;
    if flat0 && flat1 {
        return Ok(0.0);
    }
    let expected = base.weyl.scaled(libm::exp(2.0 * phi.value()));
    let diff = direct.weyl.max_diff(&expected)?;
    Ok(diff / libm::fmax(expected.max_norm(), RESIDUAL_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{flat, sphere_stereographic};
    use crate::expr::ExpressionTree as E;
    use approx::assert_relative_eq;

    #[test]
    fn zero_factor_is_identity() {
        let m = sphere_stereographic(5, &[0.1, 0.2, -0.1, 0.0, 0.3]).unwrap();
        let phi = ConformalFactor::for_metric(E::constant(0.0), &m).unwrap();
        assert_eq!(rescale(&m, &phi).unwrap().max_coeff_diff(&m).unwrap(), 0.0);
    }

    #[test]
    fn constant_factor_on_flat() {
        let m = flat(4, &[0.0; 4]).unwrap();
        let c = 0.3;
        let r = rescale(&m, &ConformalFactor::for_metric(E::constant(c), &m).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let comp = r.component(i, j);
                let expect = if i == j { libm::exp(2.0 * c) } else { 0.0 };
                assert_relative_eq!(comp.value(), expect, epsilon = 1e-15);
                assert!(comp.coeffs()[1..].iter().all(|x| *x == 0.0));
            }
        }
    }

    #[test]
    fn sphere_from_flat() {
        let n = 4;
        let p = [0.2, -0.3, 0.1, 0.4];
        let m = flat(n, &p).unwrap();
        // log(2/(1+|x|²))
        let phi = E::quotient(
            E::constant(2.0),
            E::sum(alloc::vec![E::constant(1.0), E::radius_squared(n)]),
        )
        .log();
        let r = rescale(&m, &ConformalFactor::for_metric(phi, &m).unwrap()).unwrap();
        let s = sphere_stereographic(n, &p).unwrap();
        assert!(r.max_coeff_diff(&s).unwrap() < 1e-13);
    }

    #[test]
    fn linear_factor_on_flat() {
        let n = 5;
        let a = [0.3, -0.2, 0.1, 0.5, -0.4];
        let m = flat(n, &[0.1; 5]).unwrap();
        let expr = E::sum((0..n).map(|i| E::coord(i).scaled(a[i])).collect());
        let phi = ConformalFactor::for_metric(expr, &m).unwrap();
        let base = CurvatureBundle::compute(&m).unwrap();
        let rhs = schouten_law_rhs(&base, &phi).unwrap();
        let a2: f64 = a.iter().map(|x| x * x).sum();
        for i in 0..n {
            for j in 0..n {
                let expect = a[i] * a[j] - if i == j { 0.5 * a2 } else { 0.0 };
                assert_relative_eq!(rhs.at(i, j), expect, epsilon = 1e-14);
            }
        }
        assert!(schouten_law_residual(&m, &phi).unwrap() < 1e-12);
    }
}
