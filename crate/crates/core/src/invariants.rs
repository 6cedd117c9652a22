//! Scalar conformal invariants: `σ_k`, the Newton tensor, `v^(2)`, `v^(4)`,
//! `v^(6)`, and the determinant-expansion route to `v^(2)` and `v^(4)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::{raise_both, CurvatureBundle};
use crate::error::{Error, Result};
use crate::tensor::{mat_mul, trace, PointTensor, SymmetryTag, Variance};

/// Largest power of `r` tracked by [`det_sqrt_series`].
pub const MAX_SERIES_ORDER: usize = 6;

/// `A = g^{-1} P` as a row-major `(1,1)` matrix.
pub fn mixed(p: &PointTensor, ginv: &PointTensor) -> Vec<f64> {
    let n = p.dim();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| ginv.at(i, k) * p.at(k, j)).sum();
        }
    }
    a
}

/// Power sums `p_m = Tr(A^m)` for `m = 1..=upto`.
pub fn power_sums(a: &[f64], n: usize, upto: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(upto);
    let mut pow = a.to_vec();
    for m in 1..=upto {
        if m > 1 {
            pow = mat_mul(&pow, a, n);
        }
        out.push(trace(&pow, n));
    }
    out
}

/// Elementary symmetric function `σ_k` of the eigenvalues of `g^{-1}P`.
pub fn sigma_k(p: &PointTensor, ginv: &PointTensor, k: usize) -> Result<f64> {
    let n = p.dim();
    if k == 0 || k > 3 {
        return Err(Error::Rank { k });
    }
    if k > n {
        return Err(Error::Dimension { dim: n, reason: "sigma_k needs k <= n" });
    }
    let ps = power_sums(&mixed(p, ginv), n, k);
    Ok(sigma_from_power_sums(&ps, k))
}

/// Newton identities for `k <= 3`.
pub fn sigma_from_power_sums(ps: &[f64], k: usize) -> f64 {
    match k {
        1 => ps[0],
        2 => (ps[0] * ps[0] - ps[1]) / 2.0,
        3 => (ps[0] * ps[0] * ps[0] - 3.0 * ps[0] * ps[1] + 2.0 * ps[2]) / 6.0,
        _ => unreachable!("checked by callers"),
    }
}

/// `T^{ij} = σ₂ g^{ij} − σ₁ P^{ij} + (P²)^{ij}`.
pub fn newton_tensor(p: &PointTensor, ginv: &PointTensor) -> Result<PointTensor> {
    let n = p.dim();
    if n < 3 {
        return Err(Error::Dimension { dim: n, reason: "Newton tensor needs n >= 3" });
    }
    let a = mixed(p, ginv);
    let ps = power_sums(&a, n, 2);
    let s1 = sigma_from_power_sums(&ps, 1);
    let s2 = sigma_from_power_sums(&ps, 2);
    let pu = raise_both(p, ginv);
    let mut t = PointTensor::zeros(n, &[Variance::Contra; 2]);
    for i in 0..n {
        for j in 0..n {
            // (P²)^{ij} = A^i_k P^{kj}
            let p2: f64 = (0..n).map(|k| a[i * n + k] * pu.at(k, j)).sum();
            t.set(&[i, j], s2 * ginv.at(i, j) - s1 * pu.at(i, j) + p2);
        }
    }
    Ok(t.with_symmetry(SymmetryTag::SymmetricPair))
}

/// `v^(2)`, `v^(4)`, `v^(6)` from their closed formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VInvariants {
    pub v2: f64,
    pub v4: f64,
    /// `None` when `n = 4` or the bundle lacks the Bach tensor.
    pub v6: Option<f64>,
    /// `n <= 4`: `v4 = σ₂/4` is evaluated, but the identification with the
    /// expansion coefficient only holds for `n > 4`.
    pub v4_outside_hypothesis: bool,
}

pub fn v2(bundle: &CurvatureBundle) -> f64 {
    -bundle.j / 2.0
}

pub fn v4(bundle: &CurvatureBundle) -> Result<f64> {
    Ok(sigma_k(&bundle.schouten, &bundle.metric_inv, 2)? / 4.0)
}

/// `v^(6) = −⅛[σ₃ + P^{ij}B_ij / (3(n−4))]`.
pub fn v6(bundle: &CurvatureBundle) -> Result<f64> {
    let n = bundle.dim;
    if n == 4 {
        return Err(Error::Dimension { dim: n, reason: "v6 formula divides by n - 4" });
    }
    if n < 4 {
        return Err(Error::Dimension { dim: n, reason: "v6 needs the Bach tensor (n >= 5)" });
    }
    let b = bundle.bach_or_err()?;
    let s3 = sigma_k(&bundle.schouten, &bundle.metric_inv, 3)?;
    let pu = bundle.schouten_up();
    let pb: f64 = pu.components().iter().zip(b.components()).map(|(x, y)| x * y).sum();
    Ok(-(s3 + pb / (3.0 * (n as f64 - 4.0))) / 8.0)
}

pub fn v_invariants(bundle: &CurvatureBundle) -> Result<VInvariants> {
    let v6 = match v6(bundle) {
        Ok(v) => Some(v),
        Err(Error::Dimension { .. }) | Err(Error::Order { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(VInvariants { v2: v2(bundle), v4: v4(bundle)?, v6, v4_outside_hypothesis: bundle.dim <= 4 })
}

/// Truncated power series `Σ c_k r^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    pub coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn zero(order: usize) -> Self {
        PowerSeries { coeffs: vec![0.0; order + 1] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn mul(&self, other: &PowerSeries) -> PowerSeries {
        let k = self.order().min(other.order());
        let mut out = PowerSeries::zero(k);
        for i in 0..=k {
            for j in 0..=k - i {
                out.coeffs[i + j] += self.coeffs[i] * other.coeffs[j];
            }
        }
        out
    }

    /// `exp` of a series with zero constant term, via `k e_k = Σ_j j a_j e_{k−j}`.
    pub fn exp_nilpotent(&self) -> Result<PowerSeries> {
        if self.coeffs[0] != 0.0 {
            return Err(Error::Domain("exp_nilpotent needs a zero constant term".into()));
        }
        let k = self.order();
        let mut e = PowerSeries::zero(k);
        e.coeffs[0] = 1.0;
        for m in 1..=k {
            let mut s = 0.0;
            for j in 1..=m {
                s += j as f64 * self.coeffs[j] * e.coeffs[m - j];
            }
            e.coeffs[m] = s / m as f64;
        }
        Ok(e)
    }
}

/// Taylor coefficients in `r` of `√det(I + Σ_m r^{2m} C_{2m})`, computed as
/// `exp(½ Tr log(I + A(r)))` with truncated matrix series.
///
/// `c_list[m]` is the coefficient matrix of `r^{2(m+1)}` (row-major, `n × n`).
pub fn det_sqrt_series(c_list: &[Vec<f64>], n: usize, order: usize) -> Result<PowerSeries> {
    if order > MAX_SERIES_ORDER {
        return Err(Error::Order { requested: order, available: MAX_SERIES_ORDER });
    }
    for c in c_list {
        if c.len() != n * n {
            return Err(Error::Shape(alloc::format!("coefficient matrix is not {n}×{n}")));
        }
    }
    // A(r) as a list of matrices indexed by power of r.
    let mut a: Vec<Vec<f64>> = vec![vec![0.0; n * n]; order + 1];
    for (m, c) in c_list.iter().enumerate() {
        let power = 2 * (m + 1);
        if power <= order {
            a[power] = c.clone();
        }
    }
    let series_mul = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; n * n]; order + 1];
        for i in 0..=order {
            for j in 0..=order - i {
                if x[i].iter().all(|v| *v == 0.0) || y[j].iter().all(|v| *v == 0.0) {
                    continue;
                }
                let prod = mat_mul(&x[i], &y[j], n);
                for (o, p) in out[i + j].iter_mut().zip(prod) {
                    *o += p;
                }
            }
        }
        out
    };
    // Tr log(I + A) = Σ_{m>=1} (−1)^{m+1} Tr(A^m)/m; A has no constant term so m <= order.
    let mut half_trlog = PowerSeries::zero(order);
    let mut pow = a.clone();
    for m in 1..=order {
        if m > 1 {
            pow = series_mul(&pow, &a);
        }
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        for k in 0..=order {
            half_trlog.coeffs[k] += 0.5 * sign * trace(&pow[k], n) / m as f64;
        }
    }
    half_trlog.exp_nilpotent()
}

/// The determinant-expansion route.
#[derive(Debug, Clone, PartialEq)]
pub struct FgPath {
    /// `C₂ = g^{-1} g^(2) = −g^{-1}P`.
    pub c2: Vec<f64>,
    /// `Tr C₄`, pinned by the Einstein condition to `¼ Tr C₂²`.
    pub tr_c4: f64,
    pub v2: f64,
    pub v4: f64,
}

/// Feeds `g^(2) = −P` and `Tr C₄ = ¼ Tr C₂²` into the series expansion of the
/// volume ratio. Only the trace of `C₄` enters the `r⁴` coefficient, so the
/// representative `(Tr C₄ / n)·I` is used for the full matrix.
pub fn fg_path(bundle: &CurvatureBundle) -> Result<FgPath> {
    let n = bundle.dim;
    if n <= 4 {
        return Err(Error::Dimension { dim: n, reason: "expansion coefficients need n > 4" });
    }
    let c2: Vec<f64> = mixed(&bundle.schouten, &bundle.metric_inv).iter().map(|x| -x).collect();
    // trace of the r³ equation: 4 Tr C₄ − Tr C₂² = 0
    let tr_c4 = 0.25 * trace(&mat_mul(&c2, &c2, n), n);
    let mut c4 = vec![0.0; n * n];
    for i in 0..n {
        c4[i * n + i] = tr_c4 / n as f64;
    }
    let series = det_sqrt_series(&[c2.clone(), c4], n, 4)?;
    Ok(FgPath { c2, tr_c4, v2: series.coeff(2), v4: series.coeff(4) })
}

/// Everything scalar at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub newton: PointTensor,
    pub v2: f64,
    pub v4: f64,
    pub v6: Option<f64>,
    pub fg: Option<FgPath>,
}

impl InvariantSet {
    pub fn compute(bundle: &CurvatureBundle) -> Result<InvariantSet> {
        let v = v_invariants(bundle)?;
        let fg = if bundle.dim > 4 { Some(fg_path(bundle)?) } else { None };
        Ok(InvariantSet {
            sigma1: sigma_k(&bundle.schouten, &bundle.metric_inv, 1)?,
            sigma2: sigma_k(&bundle.schouten, &bundle.metric_inv, 2)?,
            sigma3: sigma_k(&bundle.schouten, &bundle.metric_inv, 3)?,
            newton: newton_tensor(&bundle.schouten, &bundle.metric_inv)?,
            v2: v.v2,
            v4: v.v4,
            v6: v.v6,
            fg,
        })
    }
}

/// Both sides of `∇_j T^{ij} = C^{kij} P_kj`.
///
/// The left side is the covariant divergence of `T` built as a jet from the
/// Schouten jets (`∂_j T^{ij} + Γ^i_jm T^{mj} + Γ^j_jm T^{im}`); the right side
/// uses the Cotton tensor at the point.
pub fn newton_divergence(bundle: &CurvatureBundle) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = bundle.dim;
    if bundle.schouten_jets.order < 1 {
        return Err(Error::Order { requested: 3, available: bundle.metric_order });
    }
    let cotton = bundle.cotton_or_err()?;
    let space = &bundle.space;
    let nv = bundle.n_vars;
    let q = 1;
    let len = space.len(q);
    let ginv = &bundle.ginv_jets;
    let p = &bundle.schouten_jets;

    // A^i_j = g^{ik} P_kj and P^{ij} = A^i_k g^{kj}
    let mut a = vec![0.0; n * n * len];
    for i in 0..n {
        for j in 0..n {
            let out = &mut a[(i * n + j) * len..(i * n + j + 1) * len];
            for k in 0..n {
                space.mul_add(q, ginv.get(i * n + k), p.get(k * n + j), 1.0, out);
            }
        }
    }
    let mut pu = vec![0.0; n * n * len];
    for i in 0..n {
        for j in 0..n {
            let mut acc = vec![0.0; len];
            for k in 0..n {
                space.mul_add(q, &a[(i * n + k) * len..], ginv.get(k * n + j), 1.0, &mut acc);
            }
            pu[(i * n + j) * len..(i * n + j + 1) * len].copy_from_slice(&acc);
        }
    }
    let mut s1 = vec![0.0; len];
    let mut tr_a2 = vec![0.0; len];
    for i in 0..n {
        for (o, x) in s1.iter_mut().zip(&a[(i * n + i) * len..(i * n + i + 1) * len]) {
            *o += x;
        }
        for k in 0..n {
            space.mul_add(q, &a[(i * n + k) * len..], &a[(k * n + i) * len..], 1.0, &mut tr_a2);
        }
    }
    let mut s2 = vec![0.0; len];
    space.mul_add(q, &s1, &s1, 0.5, &mut s2);
    for (o, x) in s2.iter_mut().zip(&tr_a2) {
        *o -= 0.5 * x;
    }
    let mut t = vec![0.0; n * n * len];
    for i in 0..n {
        for j in 0..n {
            let mut acc = vec![0.0; len];
            space.mul_add(q, &s2, ginv.get(i * n + j), 1.0, &mut acc);
            space.mul_add(q, &s1, &pu[(i * n + j) * len..], -1.0, &mut acc);
            for k in 0..n {
                space.mul_add(q, &a[(i * n + k) * len..], &pu[(k * n + j) * len..], 1.0, &mut acc);
            }
            t[(i * n + j) * len..(i * n + j + 1) * len].copy_from_slice(&acc);
        }
    }
    let gam = &bundle.gamma_jets;
    let tv = |i: usize, j: usize| t[(i * n + j) * len];
    let mut lhs = vec![0.0; n];
    for (i, out) in lhs.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..nv.min(n) {
            s += t[(i * n + j) * len + 1 + j];
        }
        for j in 0..n {
            for m in 0..n {
                s += gam.value((i * n + j) * n + m) * tv(m, j) + gam.value((j * n + j) * n + m) * tv(i, m);
            }
        }
        *out = s;
    }
    // C^{kij} P_kj = g^{ib} C_abc P^{ac}
    let gi = &bundle.metric_inv;
    let pu_v = bundle.schouten_up();
    let mut rhs = vec![0.0; n];
    for (i, out) in rhs.iter_mut().enumerate() {
        let mut s = 0.0;
        for a_ in 0..n {
            for b in 0..n {
                for c in 0..n {
                    s += gi.at(i, b) * cotton.get(&[a_, b, c]) * pu_v.at(a_, c);
                }
            }
        }
        *out = s;
    }
    Ok((lhs, rhs))
}

/// Size of the terms that make up the left side of [`newton_divergence`],
/// `|P| (|∂P| + |Γ| |P|)`.
///
/// Residuals are measured against this rather than against the result, which
/// vanishes on conformally flat metrics while the terms only cancel.
pub fn newton_divergence_scale(bundle: &CurvatureBundle) -> f64 {
    let n = bundle.dim;
    let nv = bundle.n_vars;
    let p = &bundle.schouten_jets;
    let mut dp = 0.0f64;
    for idx in 0..n * n {
        for v in 0..nv {
            dp = dp.max(p.first_partial(idx, v, nv).abs());
        }
    }
    let pn = bundle.schouten.max_norm();
    pn * (dp + bundle.christoffel.max_norm() * pn)
}
