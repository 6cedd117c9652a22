//! Dense pointwise tensors with explicit slot variance.
//!
//! Components are stored row-major with slot 0 most significant, so a rank-4
//! tensor `T_{ijkl}` lives at `((i·n + j)·n + k)·n + l`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variance {
    Co,
    Contra,
}

/// Symmetry declared on a tensor; used only by [`PointTensor::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryTag {
    None,
    /// Rank 2, `T_ij = T_ji`.
    SymmetricPair,
    /// Rank 4 with the algebraic symmetries of a curvature tensor.
    RiemannType,
    /// Symmetric positive-definite rank 2.
    Metric,
}

/// Default validation tolerance, relative to the max-norm.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PointTensor {
    dim: usize,
    variance: Vec<Variance>,
    components: Vec<f64>,
    symmetry: SymmetryTag,
}

impl PointTensor {
    pub fn zeros(dim: usize, variance: &[Variance]) -> Self {
        PointTensor {
            dim,
            variance: variance.to_vec(),
            components: vec![0.0; dim.pow(variance.len() as u32)],
            symmetry: SymmetryTag::None,
        }
    }

    pub fn from_vec(dim: usize, variance: &[Variance], components: Vec<f64>) -> Result<Self> {
        if components.len() != dim.pow(variance.len() as u32) {
            return Err(Error::Shape(alloc::format!(
                "{} components for dim {dim} rank {}",
                components.len(),
                variance.len()
            )));
        }
        Ok(PointTensor { dim, variance: variance.to_vec(), components, symmetry: SymmetryTag::None })
    }

    pub fn scalar(value: f64) -> Self {
        PointTensor { dim: 0, variance: Vec::new(), components: vec![value], symmetry: SymmetryTag::None }
    }

    /// Rank-2 covariant tensor from a closure.
    pub fn covariant2(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = PointTensor::zeros(dim, &[Variance::Co, Variance::Co]);
        for i in 0..dim {
            for j in 0..dim {
                t.components[i * dim + j] = f(i, j);
            }
        }
        t
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = PointTensor::zeros(dim, &[Variance::Contra, Variance::Co]);
        for i in 0..dim {
            t.components[i * dim + i] = 1.0;
        }
        t
    }

    pub fn with_symmetry(mut self, tag: SymmetryTag) -> Self {
        self.symmetry = tag;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn symmetry(&self) -> SymmetryTag {
        self.symmetry
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [f64] {
        &mut self.components
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.components[o] = value;
    }

    /// Rank-2 accessor.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.components[i * self.dim + j]
    }

    pub fn max_norm(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| libm::fmax(m, libm::fabs(*c)))
    }

    pub fn value(&self) -> f64 {
        self.components[0]
    }

    fn check_same(&self, other: &PointTensor) -> Result<()> {
        if self.dim != other.dim || self.variance != other.variance {
            return Err(Error::Shape("tensor shapes differ".into()));
        }
        Ok(())
    }

    pub fn axpby(&self, a: f64, other: &PointTensor, b: f64) -> Result<PointTensor> {
        self.check_same(other)?;
        let components =
            self.components.iter().zip(&other.components).map(|(x, y)| a * x + b * y).collect();
        Ok(PointTensor { dim: self.dim, variance: self.variance.clone(), components, symmetry: SymmetryTag::None })
    }

    pub fn scaled(&self, a: f64) -> PointTensor {
        let mut t = self.clone();
        t.components.iter_mut().for_each(|c| *c *= a);
        t
    }

    /// `‖self − other‖_max`.
    pub fn max_diff(&self, other: &PointTensor) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .fold(0.0, |m, (x, y)| libm::fmax(m, libm::fabs(x - y))))
    }

    /// Outer product.
    pub fn tensor_product(&self, other: &PointTensor) -> Result<PointTensor> {
        if self.dim != other.dim && self.rank() > 0 && other.rank() > 0 {
            return Err(Error::Shape("tensor dimensions differ".into()));
        }
        let dim = self.dim.max(other.dim);
        let mut variance = self.variance.clone();
        variance.extend_from_slice(&other.variance);
        let mut components = Vec::with_capacity(self.components.len() * other.components.len());
        for a in &self.components {
            for b in &other.components {
                components.push(a * b);
            }
        }
        Ok(PointTensor { dim, variance, components, symmetry: SymmetryTag::None })
    }

    /// Checks the declared symmetry to `tol × max-norm` (absolute when the tensor is zero).
    pub fn validate(&self, tol: f64) -> Result<f64> {
        let n = self.dim;
        let scale = libm::fmax(self.max_norm(), 1.0e-300);
        let mut worst: f64 = 0.0;
        match self.symmetry {
            SymmetryTag::None => {}
            SymmetryTag::SymmetricPair | SymmetryTag::Metric => {
                if self.rank() != 2 {
                    return Err(Error::Shape("symmetric-pair tag on non rank-2 tensor".into()));
                }
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max(libm::fabs(self.at(i, j) - self.at(j, i)));
                    }
                }
                if self.symmetry == SymmetryTag::Metric {
                    cholesky(&self.components, n)?;
                }
            }
            SymmetryTag::RiemannType => {
                if self.rank() != 4 {
                    return Err(Error::Shape("riemann-type tag on non rank-4 tensor".into()));
                }
                worst = riemann_symmetry_defect(self);
            }
        }
        let rel = worst / scale;
        if worst > tol * scale && worst > tol {
            return Err(Error::Shape(alloc::format!("declared symmetry violated: defect {rel:e}")));
        }
        Ok(rel)
    }
}

/// Largest violation of antisymmetry, pair symmetry and the first Bianchi identity.
pub fn riemann_symmetry_defect(t: &PointTensor) -> f64 {
    let n = t.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = t.get(&[i, j, k, l]);
                    worst = worst.max(libm::fabs(r + t.get(&[j, i, k, l])));
                    worst = worst.max(libm::fabs(r + t.get(&[i, j, l, k])));
                    worst = worst.max(libm::fabs(r - t.get(&[k, l, i, j])));
                    let bianchi = r + t.get(&[i, k, l, j]) + t.get(&[i, l, j, k]);
                    worst = worst.max(libm::fabs(bianchi));
                }
            }
        }
    }
    worst
}

/// Lower-triangular Cholesky factor of a row-major SPD matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::SingularMetric { pivot: d });
        }
        let djj = libm::sqrt(d);
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a row-major SPD matrix through its Cholesky factor.
pub fn spd_inverse(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let l = cholesky(a, n)?;
    // L^{-1} by forward substitution, then A^{-1} = L^{-T} L^{-1}.
    let mut linv = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[i * n + k] * linv[k * n + col];
            }
            linv[i * n + col] = s / l[i * n + i];
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv[k * n + i] * linv[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Ok(inv)
}

/// `√det` of an SPD matrix.
pub fn sqrt_det_spd(a: &[f64], n: usize) -> Result<f64> {
    let l = cholesky(a, n)?;
    Ok((0..n).map(|i| l[i * n + i]).product())
}

/// Row-major square matrix product.
pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// Inverse metric `g^{ij}` of a covariant SPD rank-2 tensor.
pub fn invert_metric(g: &PointTensor) -> Result<PointTensor> {
    if g.rank() != 2 || g.variance() != [Variance::Co, Variance::Co] {
        return Err(Error::Shape("metric must be covariant rank 2".into()));
    }
    let n = g.dim();
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (g.at(i, j), g.at(j, i));
            if libm::fabs(a - b) > DEFAULT_SYMMETRY_TOL * libm::fmax(1.0, libm::fabs(a)) {
                return Err(Error::Shape("metric is not symmetric".into()));
            }
        }
    }
    let inv = spd_inverse(g.components(), n)?;
    Ok(PointTensor::from_vec(n, &[Variance::Contra, Variance::Contra], inv)?
        .with_symmetry(SymmetryTag::Metric))
}

/// Einstein sum over two slots of opposite variance.
pub fn contract(t: &PointTensor, slot_a: usize, slot_b: usize) -> Result<PointTensor> {
    let r = t.rank();
    if slot_a >= r || slot_b >= r || slot_a == slot_b {
        return Err(Error::Shape(alloc::format!("invalid slots {slot_a}, {slot_b} for rank {r}")));
    }
    if t.variance()[slot_a] == t.variance()[slot_b] {
        return Err(Error::Variance { slot_a, slot_b });
    }
    let n = t.dim();
    let variance: Vec<Variance> = t
        .variance()
        .iter()
        .enumerate()
        .filter(|(s, _)| *s != slot_a && *s != slot_b)
        .map(|(_, v)| *v)
        .collect();
    let mut out = if variance.is_empty() {
        PointTensor::scalar(0.0)
    } else {
        PointTensor::zeros(n, &variance)
    };
    let mut idx = vec![0usize; r];
    for (pos, value) in t.components().iter().enumerate() {
        let mut p = pos;
        for s in (0..r).rev() {
            idx[s] = p % n;
            p /= n;
        }
        if idx[slot_a] != idx[slot_b] {
            continue;
        }
        let o = idx
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != slot_a && *s != slot_b)
            .fold(0, |acc, (_, &i)| acc * n + i);
        out.components_mut()[o] += value;
    }
    Ok(out)
}

/// Changes the variance of one slot using `metric` (covariant, lowering) or
/// `inverse` (contravariant, raising).
pub fn move_index(t: &PointTensor, slot: usize, metric: &PointTensor) -> Result<PointTensor> {
    let n = t.dim();
    let r = t.rank();
    if slot >= r || metric.rank() != 2 || metric.dim() != n {
        return Err(Error::Shape("invalid index move".into()));
    }
    let target = match (t.variance()[slot], metric.variance()) {
        (Variance::Co, [Variance::Contra, Variance::Contra]) => Variance::Contra,
        (Variance::Contra, [Variance::Co, Variance::Co]) => Variance::Co,
        _ => return Err(Error::Variance { slot_a: slot, slot_b: slot }),
    };
    let mut variance = t.variance().to_vec();
    variance[slot] = target;
    let mut out = PointTensor::zeros(n, &variance);
    let stride = n.pow((r - slot - 1) as u32);
    for (pos, slot_out) in out.components_mut().iter_mut().enumerate() {
        let i = (pos / stride) % n;
        let base = pos - i * stride;
        let mut s = 0.0;
        for k in 0..n {
            s += metric.at(i, k) * t.components()[base + k * stride];
        }
        *slot_out = s;
    }
    Ok(out)
}

/// `(a ∧◯ b)_{ijkl} = a_ik b_jl + a_jl b_ik − a_il b_jk − a_jk b_il`.
pub fn kulkarni_nomizu(a: &PointTensor, b: &PointTensor) -> Result<PointTensor> {
    let co2 = [Variance::Co, Variance::Co];
    if a.variance() != co2 || b.variance() != co2 || a.dim() != b.dim() {
        return Err(Error::Shape("Kulkarni-Nomizu needs two covariant rank-2 tensors".into()));
    }
    let n = a.dim();
    let mut out = PointTensor::zeros(n, &[Variance::Co; 4]);
    let c = out.components_mut();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    c[((i * n + j) * n + k) * n + l] = a.at(i, k) * b.at(j, l)
                        + a.at(j, l) * b.at(i, k)
                        - a.at(i, l) * b.at(j, k)
                        - a.at(j, k) * b.at(i, l);
                }
            }
        }
    }
    Ok(out.with_symmetry(SymmetryTag::RiemannType))
}
