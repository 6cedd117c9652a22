//! Pointwise curvature from a [`MetricJet`].
//!
//! Conventions, fixed once for the whole crate:
//!
//! * `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
//! * `R(∂_i,∂_j)∂_l = R^m_{lij} ∂_m` with
//!   `R^m_{lij} = ∂_iΓ^m_{jl} − ∂_jΓ^m_{il} + Γ^m_{ip}Γ^p_{jl} − Γ^m_{jp}Γ^p_{il}`,
//!   and `R_{ijkl} = g_{km} R^m_{lij}`. The unit sphere then has
//!   `R_{ijkl} = g_ik g_jl − g_il g_jk` and scalar curvature `n(n−1)`.
//! * `Ric_jl = g^{ik} R_{ijkl}`, `R = g^{jl} Ric_jl`, `J = R / (2(n−1))`,
//!   `P = (Ric − J g) / (n−2)`, `W = Rm − P ∧◯ g`.
//! * Cotton: `C_ijk = ∇_k P_ij − ∇_j P_ik`.
//! * Bach: `B_ij = (n−3)^{-1} ∇^k∇^l W_likj + (n−2)^{-1} R^{kl} W_likj`.
//!
//! Each stage consumes one derivative order: a metric jet of order 4 yields
//! Christoffel symbols to order 3, curvature to order 2, `∇P` at the point and
//! the Bach tensor at the point.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::metric::MetricJet;
use crate::tensor::{spd_inverse, PointTensor, SymmetryTag, Variance};

/// Flat storage for a tensor whose components are jets of one order.
#[derive(Debug, Clone)]
pub(crate) struct JetField {
    pub order: usize,
    pub stride: usize,
    pub data: Vec<f64>,
}

impl JetField {
    pub fn zeros(space: &JetSpace, order: usize, count: usize) -> Self {
        let stride = space.len(order);
        JetField { order, stride, data: vec![0.0; stride * count] }
    }

    #[inline]
    pub fn get(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.stride..(idx + 1) * self.stride]
    }

    #[inline]
    pub fn get_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.data[idx * self.stride..(idx + 1) * self.stride]
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.data[idx * self.stride]
    }

    pub fn values(&self) -> Vec<f64> {
        self.data.iter().step_by(self.stride).copied().collect()
    }

    /// Per-component flag: does the jet have any nonzero coefficient?
    pub fn nonzero(&self) -> Vec<bool> {
        self.data.chunks(self.stride).map(|c| c.iter().any(|x| *x != 0.0)).collect()
    }

    /// Coefficient of `x_var` (the first partial derivative at the point).
    #[inline]
    pub fn first_partial(&self, idx: usize, var: usize, n_vars: usize) -> f64 {
        if var < n_vars && self.order >= 1 {
            self.data[idx * self.stride + 1 + var]
        } else {
            0.0
        }
    }
}

#[inline]
fn axpy(out: &mut [f64], a: &[f64], scale: f64) {
    for (o, x) in out.iter_mut().zip(a) {
        *o += scale * x;
    }
}

/// Christoffel symbols of the second kind as jets, `Γ^k_ij` at `(k·n + i)·n + j`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    space: Arc<JetSpace>,
    field: JetField,
}

impl Christoffel {
    pub fn order(&self) -> usize {
        self.field.order
    }

    pub fn jet(&self, k: usize, i: usize, j: usize) -> Jet {
        let idx = (k * self.dim + i) * self.dim + j;
        Jet::from_coeffs(&self.space, self.field.order, self.field.get(idx).to_vec())
            .expect("field matches space")
    }

    pub fn value(&self, k: usize, i: usize, j: usize) -> f64 {
        self.field.value((k * self.dim + i) * self.dim + j)
    }

    pub fn values(&self) -> PointTensor {
        PointTensor::from_vec(self.dim, &[Variance::Contra, Variance::Co, Variance::Co], self.field.values())
            .expect("shape")
    }
}

struct Stages {
    n: usize,
    nv: usize,
    space: Arc<JetSpace>,
    ginv: JetField,
    gamma: JetField,
    riemann: Option<JetField>,
    ricci: Option<JetField>,
}

fn inverse_metric_jets(m: &MetricJet) -> Result<JetField> {
    let n = m.dim();
    let q = m.order();
    let space = m.space();
    let s = m.stride();
    let g = m.raw();
    let g0: Vec<f64> = (0..n * n).map(|k| g[k * s]).collect();
    let g0inv = spd_inverse(&g0, n)?;

    // g = g0 (I + g0^{-1} N) with N nilpotent, so g^{-1} = Σ_m (−g0^{-1} N)^m g0^{-1}.
    let mut minus_m = JetField::zeros(space, q, n * n);
    for i in 0..n {
        for j in 0..n {
            let out = minus_m.get_mut(i * n + j);
            for k in 0..n {
                let c = -g0inv[i * n + k];
                if c != 0.0 {
                    let nk = &g[(k * n + j) * s..(k * n + j + 1) * s];
                    for (o, x) in out.iter_mut().zip(nk).skip(1) {
                        *o += c * x;
                    }
                }
            }
        }
    }
    let mut sum = JetField::zeros(space, q, n * n);
    let mut term = JetField::zeros(space, q, n * n);
    for k in 0..n * n {
        sum.get_mut(k)[0] = g0inv[k];
        term.get_mut(k)[0] = g0inv[k];
    }
    let m_nz = minus_m.nonzero();
    for _ in 0..q {
        let mut next = JetField::zeros(space, q, n * n);
        let t_nz = term.nonzero();
        for i in 0..n {
            for j in 0..n {
                let out = next.get_mut(i * n + j);
                for k in 0..n {
                    if m_nz[i * n + k] && t_nz[k * n + j] {
                        space.mul_add(q, minus_m.get(i * n + k), term.get(k * n + j), 1.0, out);
                    }
                }
            }
        }
        for (a, b) in sum.data.iter_mut().zip(&next.data) {
            *a += b;
        }
        term = next;
    }
    Ok(sum)
}

fn christoffel_jets(m: &MetricJet, ginv: &JetField) -> Result<JetField> {
    let n = m.dim();
    let q = m.order();
    if q < 1 {
        return Err(Error::Order { requested: 1, available: q });
    }
    let space = m.space();
    let s = m.stride();
    let g = m.raw();
    let nv = m.n_vars();
    let qo = q - 1;
    let so = space.len(qo);

    // dg[(k·n + i)·n + j] = ∂_k g_ij
    let mut dg = JetField::zeros(space, qo, n * n * n);
    for k in 0..nv.min(n) {
        for i in 0..n {
            for j in i..n {
                let src = &g[(i * n + j) * s..(i * n + j + 1) * s];
                let mut tmp = vec![0.0; so];
                space.derivative(q, src, k, &mut tmp);
                dg.get_mut((k * n + i) * n + j).copy_from_slice(&tmp);
                dg.get_mut((k * n + j) * n + i).copy_from_slice(&tmp);
            }
        }
    }
    // first kind Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = JetField::zeros(space, qo, n * n * n);
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = vec![0.0; so];
                axpy(&mut acc, dg.get((i * n + j) * n + l), 0.5);
                axpy(&mut acc, dg.get((j * n + i) * n + l), 0.5);
                axpy(&mut acc, dg.get((l * n + i) * n + j), -0.5);
                first.get_mut((l * n + i) * n + j).copy_from_slice(&acc);
                first.get_mut((l * n + j) * n + i).copy_from_slice(&acc);
            }
        }
    }
    let mut gamma = JetField::zeros(space, qo, n * n * n);
    let gi_nz = ginv.nonzero();
    let first_nz = first.nonzero();
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = vec![0.0; so];
                for l in 0..n {
                    if gi_nz[k * n + l] && first_nz[(l * n + i) * n + j] {
                        space.mul_add(qo, ginv.get(k * n + l), first.get((l * n + i) * n + j), 1.0, &mut acc);
                    }
                }
                gamma.get_mut((k * n + i) * n + j).copy_from_slice(&acc);
                gamma.get_mut((k * n + j) * n + i).copy_from_slice(&acc);
            }
        }
    }
    Ok(gamma)
}

/// Returns `(R_ijkl, Ric_jl)` as jets of order `q − 2`.
fn riemann_jets(m: &MetricJet, gamma: &JetField) -> Result<(JetField, JetField)> {
    let n = m.dim();
    let q = m.order();
    if q < 2 {
        return Err(Error::Order { requested: 2, available: q });
    }
    let space = m.space();
    let nv = m.n_vars();
    let qo = q - 2;
    let so = space.len(qo);
    let s = m.stride();
    let g = m.raw();

    // dgamma[((a·n + k)·n + i)·n + j] = ∂_a Γ^k_ij
    let mut dgamma = JetField::zeros(space, qo, n * n * n * n);
    let mut tmp = vec![0.0; so];
    for a in 0..nv.min(n) {
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    space.derivative(q - 1, gamma.get((k * n + i) * n + j), a, &mut tmp);
                    dgamma.get_mut(((a * n + k) * n + i) * n + j).copy_from_slice(&tmp);
                    dgamma.get_mut(((a * n + k) * n + j) * n + i).copy_from_slice(&tmp);
                }
            }
        }
    }
    // up[((m·n + l)·n + i)·n + j] = R^m_lij for i < j
    let mut up = JetField::zeros(space, qo, n * n * n * n);
    let gam_nz = gamma.nonzero();
    let mut acc = vec![0.0; so];
    for mm in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    acc.iter_mut().for_each(|x| *x = 0.0);
                    axpy(&mut acc, dgamma.get(((i * n + mm) * n + j) * n + l), 1.0);
                    axpy(&mut acc, dgamma.get(((j * n + mm) * n + i) * n + l), -1.0);
                    for p in 0..n {
                        if gam_nz[(mm * n + i) * n + p] && gam_nz[(p * n + j) * n + l] {
                            space.mul_add(qo, gamma.get((mm * n + i) * n + p), gamma.get((p * n + j) * n + l), 1.0, &mut acc);
                        }
                        if gam_nz[(mm * n + j) * n + p] && gam_nz[(p * n + i) * n + l] {
                            space.mul_add(qo, gamma.get((mm * n + j) * n + p), gamma.get((p * n + i) * n + l), -1.0, &mut acc);
                        }
                    }
                    up.get_mut(((mm * n + l) * n + i) * n + j).copy_from_slice(&acc);
                }
            }
        }
    }
    // R_ijkl = g_km R^m_lij
    let mut rm = JetField::zeros(space, qo, n * n * n * n);
    let up_nz = up.nonzero();
    let g_nz: Vec<bool> = g.chunks(s).map(|c| c.iter().any(|x| *x != 0.0)).collect();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                for l in 0..n {
                    acc.iter_mut().for_each(|x| *x = 0.0);
                    for mm in 0..n {
                        if g_nz[k * n + mm] && up_nz[((mm * n + l) * n + i) * n + j] {
                            space.mul_add(qo, &g[(k * n + mm) * s..], up.get(((mm * n + l) * n + i) * n + j), 1.0, &mut acc);
                        }
                    }
                    rm.get_mut(((i * n + j) * n + k) * n + l).copy_from_slice(&acc);
                    for x in acc.iter_mut() {
                        *x = -*x;
                    }
                    rm.get_mut(((j * n + i) * n + k) * n + l).copy_from_slice(&acc);
                }
            }
        }
    }
    // Ric_lj = R^i_lij
    let mut ric = JetField::zeros(space, qo, n * n);
    for l in 0..n {
        for j in l..n {
            let mut acc = vec![0.0; so];
            for i in 0..n {
                if i < j {
                    axpy(&mut acc, up.get(((i * n + l) * n + i) * n + j), 1.0);
                } else if i > j {
                    axpy(&mut acc, up.get(((i * n + l) * n + j) * n + i), -1.0);
                }
            }
            ric.get_mut(l * n + j).copy_from_slice(&acc);
            ric.get_mut(j * n + l).copy_from_slice(&acc);
        }
    }
    Ok((rm, ric))
}

fn run_stages(m: &MetricJet, want_riemann: bool) -> Result<Stages> {
    let ginv = inverse_metric_jets(m)?;
    let gamma = christoffel_jets(m, &ginv)?;
    let (riemann, ricci) = if want_riemann {
        let (r, ric) = riemann_jets(m, &gamma)?;
        (Some(r), Some(ric))
    } else {
        (None, None)
    };
    Ok(Stages { n: m.dim(), nv: m.n_vars(), space: m.space().clone(), ginv, gamma, riemann, ricci })
}

/// Christoffel symbols with `order − 1` derivatives available.
pub fn christoffel(m: &MetricJet) -> Result<Christoffel> {
    let st = run_stages(m, false)?;
    Ok(Christoffel { dim: st.n, space: st.space, field: st.gamma })
}

/// Covariant Riemann tensor at the point.
pub fn riemann(m: &MetricJet) -> Result<PointTensor> {
    let st = run_stages(m, true)?;
    let rm = st.riemann.expect("requested");
    Ok(PointTensor::from_vec(st.n, &[Variance::Co; 4], rm.values())?.with_symmetry(SymmetryTag::RiemannType))
}

/// Everything curvature-related at a point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub dim: usize,
    /// Order of the metric jet the bundle was built from.
    pub metric_order: usize,
    pub metric: PointTensor,
    pub metric_inv: PointTensor,
    pub christoffel: PointTensor,
    pub riemann: PointTensor,
    pub ricci: PointTensor,
    pub scalar: f64,
    pub schouten: PointTensor,
    pub j: f64,
    pub weyl: PointTensor,
    /// `∇_k P_ij` stored at `[i][j][k]`; needs metric order ≥ 3.
    pub schouten_grad: Option<PointTensor>,
    pub cotton: Option<PointTensor>,
    /// `∇^l W_likj` stored at `[i][k][j]`; needs metric order ≥ 4 and `n ≥ 4`.
    pub weyl_divergence: Option<PointTensor>,
    pub bach: Option<PointTensor>,
    pub(crate) space: Arc<JetSpace>,
    pub(crate) n_vars: usize,
    pub(crate) ginv_jets: JetField,
    pub(crate) gamma_jets: JetField,
    pub(crate) schouten_jets: JetField,
}

impl CurvatureBundle {
    /// Runs the full pipeline, computing every stage the metric order allows.
    pub fn compute(m: &MetricJet) -> Result<CurvatureBundle> {
        let n = m.dim();
        if n < 3 {
            return Err(Error::Dimension { dim: n, reason: "Schouten tensor needs n >= 3" });
        }
        let st = run_stages(m, true)?;
        let q = m.order();
        let space = st.space.clone();
        let qc = q - 2;
        let sc = space.len(qc);
        let nv = st.nv;
        let rm = st.riemann.expect("requested");
        let ric = st.ricci.expect("requested");
        let ginv = st.ginv;
        let gamma = st.gamma;
        let g = m.raw();
        let s = m.stride();

        let mut scalar = vec![0.0; sc];
        for j in 0..n {
            for l in 0..n {
                space.mul_add(qc, ginv.get(j * n + l), ric.get(j * n + l), 1.0, &mut scalar);
            }
        }
        let nf = n as f64;
        let jj: Vec<f64> = scalar.iter().map(|x| x / (2.0 * (nf - 1.0))).collect();
        let mut p = JetField::zeros(&space, qc, n * n);
        for i in 0..n {
            for k in i..n {
                let mut acc = vec![0.0; sc];
                axpy(&mut acc, ric.get(i * n + k), 1.0 / (nf - 2.0));
                space.mul_add(qc, &jj, &g[(i * n + k) * s..], -1.0 / (nf - 2.0), &mut acc);
                p.get_mut(i * n + k).copy_from_slice(&acc);
                p.get_mut(k * n + i).copy_from_slice(&acc);
            }
        }
        // W = Rm − P ∧◯ g
        let mut w = JetField::zeros(&space, qc, n * n * n * n);
        let gs = |a: usize, b: usize| &g[(a * n + b) * s..(a * n + b + 1) * s];
        let g_nz: Vec<bool> = g.chunks(s).map(|c| c.iter().any(|x| *x != 0.0)).collect();
        let p_nz = p.nonzero();
        let wterm = |acc: &mut [f64], a: usize, b: usize, c: usize, d: usize, sign: f64| {
            if p_nz[a * n + b] && g_nz[c * n + d] {
                space.mul_add(qc, p.get(a * n + b), gs(c, d), sign, acc);
            }
        };
        for i in 0..n {
            for jx in 0..n {
                if i == jx {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        if k == l {
                            continue;
                        }
                        let idx = ((i * n + jx) * n + k) * n + l;
                        let acc = w.get_mut(idx);
                        acc.copy_from_slice(rm.get(idx));
                        wterm(acc, i, k, jx, l, -1.0);
                        wterm(acc, jx, l, i, k, -1.0);
                        wterm(acc, i, l, jx, k, 1.0);
                        wterm(acc, jx, k, i, l, 1.0);
                    }
                }
            }
        }

        let metric = m.values();
        let metric_inv = PointTensor::from_vec(n, &[Variance::Contra; 2], ginv.values())?
            .with_symmetry(SymmetryTag::Metric);
        let gamma_vals = gamma.values();
        let gam = |k: usize, i: usize, j: usize| gamma_vals[(k * n + i) * n + j];

        let (schouten_grad, cotton) = if q >= 3 {
            let mut dp = PointTensor::zeros(n, &[Variance::Co; 3]);
            for i in 0..n {
                for jx in 0..n {
                    for k in 0..n {
                        let mut v = p.first_partial(i * n + jx, k, nv);
                        for mm in 0..n {
                            v -= gam(mm, k, i) * p.value(mm * n + jx) + gam(mm, k, jx) * p.value(i * n + mm);
                        }
                        dp.set(&[i, jx, k], v);
                    }
                }
            }
            let mut c = PointTensor::zeros(n, &[Variance::Co; 3]);
            for i in 0..n {
                for jx in 0..n {
                    for k in 0..n {
                        c.set(&[i, jx, k], dp.get(&[i, jx, k]) - dp.get(&[i, k, jx]));
                    }
                }
            }
            (Some(dp), Some(c))
        } else {
            (None, None)
        };

        let (weyl_divergence, bach) = if q >= 4 && n >= 4 {
            let (d, b) = bach_from_weyl(&space, n, nv, &ginv, &gamma, &w, &ric)?;
            (Some(d), Some(b))
        } else {
            (None, None)
        };

        let scalar_v = scalar[0];
        Ok(CurvatureBundle {
            dim: n,
            metric_order: q,
            metric,
            metric_inv,
            christoffel: PointTensor::from_vec(n, &[Variance::Contra, Variance::Co, Variance::Co], gamma_vals.clone())?,
            riemann: PointTensor::from_vec(n, &[Variance::Co; 4], rm.values())?.with_symmetry(SymmetryTag::RiemannType),
            ricci: PointTensor::from_vec(n, &[Variance::Co; 2], ric.values())?.with_symmetry(SymmetryTag::SymmetricPair),
            scalar: scalar_v,
            schouten: PointTensor::from_vec(n, &[Variance::Co; 2], p.values())?.with_symmetry(SymmetryTag::SymmetricPair),
            j: scalar_v / (2.0 * (nf - 1.0)),
            weyl: PointTensor::from_vec(n, &[Variance::Co; 4], w.values())?.with_symmetry(SymmetryTag::RiemannType),
            schouten_grad,
            cotton,
            weyl_divergence,
            bach,
            space,
            n_vars: nv,
            ginv_jets: ginv,
            gamma_jets: gamma,
            schouten_jets: p,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Ricci with both indices raised.
    pub fn ricci_up(&self) -> PointTensor {
        raise_both(&self.ricci, &self.metric_inv)
    }

    /// Schouten with both indices raised.
    pub fn schouten_up(&self) -> PointTensor {
        raise_both(&self.schouten, &self.metric_inv)
    }

    pub fn bach_or_err(&self) -> Result<&PointTensor> {
        if self.dim < 4 {
            return Err(Error::Dimension { dim: self.dim, reason: "Bach tensor needs n >= 4" });
        }
        self.bach.as_ref().ok_or(Error::Order { requested: 4, available: self.metric_order })
    }

    pub fn cotton_or_err(&self) -> Result<&PointTensor> {
        self.cotton.as_ref().ok_or(Error::Order { requested: 3, available: self.metric_order })
    }
}

pub(crate) fn raise_both(t: &PointTensor, ginv: &PointTensor) -> PointTensor {
    let n = t.dim();
    let mut out = PointTensor::zeros(n, &[Variance::Contra; 2]);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += ginv.at(i, a) * ginv.at(j, b) * t.at(a, b);
                }
            }
            out.set(&[i, j], s);
        }
    }
    out
}

/// Returns `(D, B)` with `D_ikj = ∇^l W_likj` and the Bach tensor.
fn bach_from_weyl(
    space: &Arc<JetSpace>,
    n: usize,
    nv: usize,
    ginv: &JetField,
    gamma: &JetField,
    w: &JetField,
    ric: &JetField,
) -> Result<(PointTensor, PointTensor)> {
    // W is order 2 here; D is built as an order-1 jet so it can be differentiated once more.
    let q1 = 1;
    let s1 = space.len(q1);
    let idx3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    let idx4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;

    // Λ^p = g^{lb} Γ^p_bl, Γ̃^{lp}_c = g^{lb} Γ^p_bc
    let gi_nz = ginv.nonzero();
    let gam_nz = gamma.nonzero();
    let mut lambda = JetField::zeros(space, q1, n);
    let mut gt = JetField::zeros(space, q1, n * n * n);
    for p in 0..n {
        for l in 0..n {
            for c in 0..n {
                let out = gt.get_mut(idx3(l, p, c));
                for b in 0..n {
                    if gi_nz[l * n + b] && gam_nz[idx3(p, b, c)] {
                        space.mul_add(q1, ginv.get(l * n + b), gamma.get(idx3(p, b, c)), 1.0, out);
                    }
                }
            }
        }
        let out = lambda.get_mut(p);
        for l in 0..n {
            for b in 0..n {
                if gi_nz[l * n + b] && gam_nz[idx3(p, b, l)] {
                    space.mul_add(q1, ginv.get(l * n + b), gamma.get(idx3(p, b, l)), 1.0, out);
                }
            }
        }
    }
    let lam_nz = lambda.nonzero();
    let gt_nz = gt.nonzero();
    let w_nz = w.nonzero();
    // dw[b][...] = ∂_b W (order 1)
    let n4 = n * n * n * n;
    let mut dw = JetField::zeros(space, q1, nv * n4);
    for b in 0..nv {
        for t in 0..n4 {
            if w_nz[t] {
                space.derivative(2, w.get(t), b, dw.get_mut(b * n4 + t));
            }
        }
    }
    let dw_nz = dw.nonzero();
    let mut d = JetField::zeros(space, q1, n * n * n);
    let mut acc = vec![0.0; s1];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                acc.iter_mut().for_each(|x| *x = 0.0);
                for l in 0..n {
                    for b in 0..nv {
                        let t = b * n4 + idx4(l, i, k, j);
                        if gi_nz[l * n + b] && dw_nz[t] {
                            space.mul_add(q1, ginv.get(l * n + b), dw.get(t), 1.0, &mut acc);
                        }
                    }
                }
                for p in 0..n {
                    if lam_nz[p] && w_nz[idx4(p, i, k, j)] {
                        space.mul_add(q1, lambda.get(p), w.get(idx4(p, i, k, j)), -1.0, &mut acc);
                    }
                    for l in 0..n {
                        for (g_idx, w_idx) in [
                            (idx3(l, p, i), idx4(l, p, k, j)),
                            (idx3(l, p, k), idx4(l, i, p, j)),
                            (idx3(l, p, j), idx4(l, i, k, p)),
                        ] {
                            if gt_nz[g_idx] && w_nz[w_idx] {
                                space.mul_add(q1, gt.get(g_idx), w.get(w_idx), -1.0, &mut acc);
                            }
                        }
                    }
                }
                d.get_mut(idx3(i, k, j)).copy_from_slice(&acc);
            }
        }
    }
    // S_ij = g^{ka} ∇_a D_ikj at the point
    let mut bach = PointTensor::zeros(n, &[Variance::Co; 2]);
    let nf = n as f64;
    let ric_up = {
        let ginv_v = ginv.values();
        let ric_v = ric.values();
        let mut r = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += ginv_v[k * n + a] * ginv_v[l * n + b] * ric_v[a * n + b];
                    }
                }
                r[k * n + l] = s;
            }
        }
        r
    };
    for i in 0..n {
        for j in 0..n {
            let mut sij = 0.0;
            for k in 0..n {
                for a in 0..nv {
                    sij += ginv.value(k * n + a) * d.first_partial(idx3(i, k, j), a, nv);
                }
            }
            for p in 0..n {
                sij -= lambda.value(p) * d.value(idx3(i, p, j));
                for k in 0..n {
                    sij -= gt.value(idx3(k, p, i)) * d.value(idx3(p, k, j));
                    sij -= gt.value(idx3(k, p, j)) * d.value(idx3(i, k, p));
                }
            }
            let mut rw = 0.0;
            for k in 0..n {
                for l in 0..n {
                    rw += ric_up[k * n + l] * w.value(idx4(l, i, k, j));
                }
            }
            bach.set(&[i, j], sij / (nf - 3.0) + rw / (nf - 2.0));
        }
    }
    let dvals = PointTensor::from_vec(n, &[Variance::Co; 3], d.values())?;
    Ok((dvals, bach.with_symmetry(SymmetryTag::SymmetricPair)))
}

/// Schouten tensor and its trace `J`.
pub fn schouten(m: &MetricJet) -> Result<(PointTensor, f64)> {
    let b = CurvatureBundle::compute(m)?;
    Ok((b.schouten, b.j))
}

pub fn weyl(m: &MetricJet) -> Result<PointTensor> {
    Ok(CurvatureBundle::compute(m)?.weyl)
}

pub fn cotton(m: &MetricJet) -> Result<PointTensor> {
    let b = CurvatureBundle::compute(m)?;
    b.cotton.ok_or(Error::Order { requested: 3, available: m.order() })
}

pub fn bach(m: &MetricJet) -> Result<PointTensor> {
    if m.dim() <= 3 {
        return Err(Error::Dimension { dim: m.dim(), reason: "Bach tensor needs n >= 4" });
    }
    let b = CurvatureBundle::compute(m)?;
    b.bach.ok_or(Error::Order { requested: 4, available: m.order() })
}
