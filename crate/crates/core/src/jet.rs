//! Multivariate truncated Taylor series ("jets").
//!
//! A jet of order `p` in `n` variables stores, for every multi-index `α` with
//! `|α| <= p`, the normalized coefficient `∂^α f(x₀) / α!`. Multi-indices are
//! laid out in graded lexicographic order: all degree-0 entries, then degree 1,
//! and so on, with `x₁` exponents descending inside each degree. A jet of lower
//! order is therefore a prefix of the coefficient vector of a higher-order jet
//! in the same [`JetSpace`], which is what the curvature pipeline relies on when
//! it truncates derivatives stage by stage.
//!
//! The heavy lifting lives in slice kernels on [`JetSpace`] (`mul_add`,
//! `derivative`, `compose`). [`Jet`] is the owning, shape-checked wrapper used
//! at API boundaries.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 4;
/// Highest supported number of jet variables.
pub const MAX_VARS: usize = 8;

/// Exponent vector; entries beyond `n_vars` are zero.
pub type MultiIndex = [u8; MAX_VARS];

/// Index tables shared by every jet over the same variables and maximal order.
#[derive(Debug)]
pub struct JetSpace {
    n_vars: usize,
    max_order: usize,
    exponents: Vec<MultiIndex>,
    /// `offsets[p]` is the number of multi-indices with `|α| < p`.
    offsets: [usize; MAX_ORDER + 2],
    lookup: BTreeMap<MultiIndex, usize>,
    pair_start: Vec<usize>,
    pair_a: Vec<u32>,
    pair_b: Vec<u32>,
    /// `shift[var * len + a]` is the index of `α_a + e_var`, or `u32::MAX`.
    shift: Vec<u32>,
    factorials: Vec<f64>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
    if parts == 0 {
        if total == 0 {
            let mut idx = [0u8; MAX_VARS];
            idx[..prefix.len()].copy_from_slice(prefix);
            out.push(idx);
        }
        return;
    }
    if parts == 1 {
        prefix.push(total as u8);
        compositions(0, 0, prefix, out);
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u8);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn degree(alpha: &MultiIndex) -> usize {
    alpha.iter().map(|&e| e as usize).sum()
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl JetSpace {
    pub fn new(n_vars: usize, max_order: usize) -> Result<Arc<JetSpace>> {
        if max_order > MAX_ORDER {
            return Err(Error::Order { requested: max_order, available: MAX_ORDER });
        }
        if n_vars > MAX_VARS {
            return Err(Error::Shape(alloc::format!(
                "{n_vars} jet variables requested, at most {MAX_VARS} supported"
            )));
        }
        let mut exponents = Vec::new();
        let mut offsets = [0usize; MAX_ORDER + 2];
        for deg in 0..=max_order {
            offsets[deg] = exponents.len();
            if n_vars == 0 {
                if deg == 0 {
                    exponents.push([0u8; MAX_VARS]);
                }
            } else {
                compositions(deg, n_vars, &mut Vec::new(), &mut exponents);
            }
        }
        for slot in offsets.iter_mut().skip(max_order + 1) {
            *slot = exponents.len();
        }
        let len = exponents.len();
        let lookup: BTreeMap<MultiIndex, usize> =
            exponents.iter().enumerate().map(|(i, a)| (*a, i)).collect();

        let mut pair_start = Vec::with_capacity(len + 1);
        let mut pair_a = Vec::new();
        let mut pair_b = Vec::new();
        for c in 0..len {
            pair_start.push(pair_a.len());
            let target = exponents[c];
            let deg_c = degree(&target);
            for a in 0..offsets[deg_c + 1] {
                let alpha = exponents[a];
                if alpha.iter().zip(target.iter()).all(|(x, y)| x <= y) {
                    let mut beta = [0u8; MAX_VARS];
                    for v in 0..MAX_VARS {
                        beta[v] = target[v] - alpha[v];
                    }
                    // each unordered pair once; the kernel adds both orientations
                    let b = lookup[&beta];
                    if a <= b {
                        pair_a.push(a as u32);
                        pair_b.push(b as u32);
                    }
                }
            }
        }
        pair_start.push(pair_a.len());

        let mut shift = vec![u32::MAX; n_vars * len];
        for var in 0..n_vars {
            for a in 0..len {
                let mut up = exponents[a];
                up[var] += 1;
                if let Some(&idx) = lookup.get(&up) {
                    shift[var * len + a] = idx as u32;
                }
            }
        }
        let factorials = exponents
            .iter()
            .map(|a| a.iter().map(|&e| factorial(e as usize)).product())
            .collect();

        Ok(Arc::new(JetSpace {
            n_vars,
            max_order,
            exponents,
            offsets,
            lookup,
            pair_start,
            pair_a,
            pair_b,
            shift,
            factorials,
        }))
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of coefficients of a jet of the given order.
    #[inline]
    pub fn len(&self, order: usize) -> usize {
        self.offsets[order + 1]
    }

    pub fn exponents(&self) -> &[MultiIndex] {
        &self.exponents
    }

    /// Position of a multi-index in the graded ordering.
    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        if alpha.len() > MAX_VARS || alpha.iter().skip(self.n_vars).any(|&e| e != 0) {
            return None;
        }
        let mut key = [0u8; MAX_VARS];
        key[..alpha.len()].copy_from_slice(alpha);
        self.lookup.get(&key).copied()
    }

    /// `α!` for the multi-index stored at `idx`.
    pub fn factorial_at(&self, idx: usize) -> f64 {
        self.factorials[idx]
    }

    /// `out += scale * (a * b)` truncated at `order`.
    #[inline]
    pub fn mul_add(&self, order: usize, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        let len = self.len(order);
        for (c, slot) in out[..len].iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.pair_start[c]..self.pair_start[c + 1] {
                let (i, j) = (self.pair_a[p] as usize, self.pair_b[p] as usize);
                acc += if i == j { a[i] * b[i] } else { a[i] * b[j] + a[j] * b[i] };
            }
            *slot += scale * acc;
        }
    }

    /// `out = a * b` truncated at `order`.
    pub fn mul(&self, order: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
        let len = self.len(order);
        out[..len].iter_mut().for_each(|x| *x = 0.0);
        self.mul_add(order, a, b, 1.0, out);
    }

    /// First partial derivative in `var` of an order-`order` jet, written as an
    /// order `order - 1` jet. Variables at or beyond `n_vars` are inert.
    pub fn derivative(&self, order: usize, a: &[f64], var: usize, out: &mut [f64]) {
        debug_assert!(order >= 1);
        let len = self.len(order - 1);
        if var >= self.n_vars {
            out[..len].iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let full = self.exponents.len();
        for (idx, slot) in out[..len].iter_mut().enumerate() {
            let up = self.shift[var * full + idx] as usize;
            *slot = (self.exponents[idx][var] as f64 + 1.0) * a[up];
        }
    }

    /// Evaluates `Σ_m taylor[m] (u − u₀)^m` truncated at `order`, where
    /// `taylor[m] = f^{(m)}(u₀)/m!` for the outer univariate function.
    pub fn compose(&self, order: usize, u: &[f64], taylor: &[f64], out: &mut [f64]) {
        let len = self.len(order);
        let mut nil = u[..len].to_vec();
        nil[0] = 0.0;
        let mut acc = vec![0.0; len];
        acc[0] = taylor[order.min(taylor.len() - 1)];
        let mut tmp = vec![0.0; len];
        for m in (0..order.min(taylor.len() - 1)).rev() {
            self.mul(order, &acc, &nil, &mut tmp);
            tmp[0] += taylor[m];
            core::mem::swap(&mut acc, &mut tmp);
        }
        out[..len].copy_from_slice(&acc);
    }
}

/// Univariate functions available for jet composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Exp,
    Log,
    Sin,
    Cos,
    Recip,
    Pow(f64),
}

fn binomial_real(a: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (a - i as f64)) / factorial(m)
}

/// Normalized Taylor coefficients `f^{(m)}(u₀)/m!`, `m = 0..=order`.
pub fn taylor_coefficients(f: Elementary, u0: f64, order: usize) -> Result<Vec<f64>> {
    let mut c = vec![0.0; order + 1];
    match f {
        Elementary::Exp => {
            let e = libm::exp(u0);
            for (m, slot) in c.iter_mut().enumerate() {
                *slot = e / factorial(m);
            }
        }
        Elementary::Log => {
            if !(u0 > 0.0) {
                return Err(Error::Domain(alloc::format!("log of non-positive value {u0}")));
            }
            c[0] = libm::log(u0);
            for (m, slot) in c.iter_mut().enumerate().skip(1) {
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                *slot = sign / (m as f64 * libm::pow(u0, m as f64));
            }
        }
        Elementary::Sin | Elementary::Cos => {
            let (s, co) = (libm::sin(u0), libm::cos(u0));
            // derivative cycle of sin: sin, cos, -sin, -cos
            let cycle = [s, co, -s, -co];
            let start = if f == Elementary::Sin { 0 } else { 1 };
            for (m, slot) in c.iter_mut().enumerate() {
                *slot = cycle[(start + m) % 4] / factorial(m);
            }
        }
        Elementary::Recip => {
            if u0 == 0.0 {
                return Err(Error::Domain("division by a jet with zero constant term".into()));
            }
            for (m, slot) in c.iter_mut().enumerate() {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                *slot = sign / libm::pow(u0, m as f64 + 1.0);
            }
        }
        Elementary::Pow(a) => {
            let integral = libm::trunc(a) == a && libm::fabs(a) <= 64.0;
            if integral && a >= 0.0 {
                for (m, slot) in c.iter_mut().enumerate() {
                    let b = binomial_real(a, m);
                    *slot = if b == 0.0 { 0.0 } else { b * libm::pow(u0, a - m as f64) };
                }
            } else if integral {
                if u0 == 0.0 {
                    return Err(Error::Domain(alloc::format!("zero raised to negative power {a}")));
                }
                for (m, slot) in c.iter_mut().enumerate() {
                    *slot = binomial_real(a, m) * libm::pow(u0, a - m as f64);
                }
            } else {
                if !(u0 > 0.0) {
                    return Err(Error::Domain(alloc::format!(
                        "non-integer power {a} of non-positive value {u0}"
                    )));
                }
                for (m, slot) in c.iter_mut().enumerate() {
                    *slot = binomial_real(a, m) * libm::pow(u0, a - m as f64);
                }
            }
        }
    }
    Ok(c)
}

/// Owning jet: Taylor coefficients at a fixed point in a fixed [`JetSpace`].
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn zeros(space: &Arc<JetSpace>, order: usize) -> Result<Jet> {
        if order > space.max_order {
            return Err(Error::Order { requested: order, available: space.max_order });
        }
        Ok(Jet { space: space.clone(), order, coeffs: vec![0.0; space.len(order)] })
    }

    pub fn constant(space: &Arc<JetSpace>, order: usize, value: f64) -> Result<Jet> {
        let mut j = Jet::zeros(space, order)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, var: usize, value: f64) -> Result<Jet> {
        let mut j = Jet::constant(space, order, value)?;
        if var >= space.n_vars {
            return Err(Error::Shape(alloc::format!(
                "variable {var} out of range for {} jet variables",
                space.n_vars
            )));
        }
        if order >= 1 {
            let mut alpha = [0u8; MAX_VARS];
            alpha[var] = 1;
            let idx = space.lookup[&alpha];
            j.coeffs[idx] = 1.0;
        }
        Ok(j)
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        if order > space.max_order {
            return Err(Error::Order { requested: order, available: space.max_order });
        }
        if coeffs.len() != space.len(order) {
            return Err(Error::Shape(alloc::format!(
                "expected {} coefficients, got {}",
                space.len(order),
                coeffs.len()
            )));
        }
        Ok(Jet { space: space.clone(), order, coeffs })
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn n_vars(&self) -> usize {
        self.space.n_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized coefficient `∂^α f / α!`.
    pub fn coeff(&self, alpha: &[u8]) -> Result<f64> {
        let deg: usize = alpha.iter().map(|&e| e as usize).sum();
        if deg > self.order {
            return Err(Error::Order { requested: deg, available: self.order });
        }
        let idx = self
            .space
            .index_of(alpha)
            .ok_or_else(|| Error::Shape("multi-index does not match jet variables".into()))?;
        Ok(self.coeffs[idx])
    }

    /// Raw partial derivative `∂^α f(x₀)`.
    pub fn partial(&self, alpha: &[u8]) -> Result<f64> {
        let c = self.coeff(alpha)?;
        let fact: f64 = alpha.iter().map(|&e| factorial(e as usize)).product();
        Ok(c * fact)
    }

    pub fn truncate(&self, order: usize) -> Result<Jet> {
        if order > self.order {
            return Err(Error::Order { requested: order, available: self.order });
        }
        Ok(Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.len(order)].to_vec(),
        })
    }

    /// `∂f/∂x_var` as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::Order { requested: 1, available: 0 });
        }
        let mut out = vec![0.0; self.space.len(self.order - 1)];
        self.space.derivative(self.order, &self.coeffs, var, &mut out);
        Ok(Jet { space: self.space.clone(), order: self.order - 1, coeffs: out })
    }

    pub fn same_shape(&self, other: &Jet) -> bool {
        self.order == other.order
            && self.space.n_vars == other.space.n_vars
            && self.space.max_order == other.space.max_order
    }

    fn check_shape(&self, other: &Jet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(alloc::format!(
                "jet shapes differ: ({} vars, order {}) vs ({} vars, order {})",
                self.space.n_vars,
                self.order,
                other.space.n_vars,
                other.order
            )))
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Jet { space: self.space.clone(), order: self.order, coeffs })
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Jet { space: self.space.clone(), order: self.order, coeffs })
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        let mut out = vec![0.0; self.coeffs.len()];
        self.space.mul(self.order, &self.coeffs, &other.coeffs, &mut out);
        Ok(Jet { space: self.space.clone(), order: self.order, coeffs: out })
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        self.try_mul(&other.recip()?)
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Composition with a univariate elementary function.
    pub fn apply(&self, f: Elementary) -> Result<Jet> {
        let taylor = taylor_coefficients(f, self.coeffs[0], self.order)?;
        let mut out = vec![0.0; self.coeffs.len()];
        self.space.compose(self.order, &self.coeffs, &taylor, &mut out);
        Ok(Jet { space: self.space.clone(), order: self.order, coeffs: out })
    }

    pub fn exp(&self) -> Jet {
        self.apply(Elementary::Exp).expect("exp is total")
    }

    pub fn sin(&self) -> Jet {
        self.apply(Elementary::Sin).expect("sin is total")
    }

    pub fn cos(&self) -> Jet {
        self.apply(Elementary::Cos).expect("cos is total")
    }

    pub fn ln(&self) -> Result<Jet> {
        self.apply(Elementary::Log)
    }

    pub fn recip(&self) -> Result<Jet> {
        self.apply(Elementary::Recip)
    }

    pub fn powf(&self, exponent: f64) -> Result<Jet> {
        self.apply(Elementary::Pow(exponent))
    }
}

/// Binary jet operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn jet_arith(lhs: &Jet, rhs: &Jet, op: ArithOp) -> Result<Jet> {
    match op {
        ArithOp::Add => lhs.try_add(rhs),
        ArithOp::Sub => lhs.try_sub(rhs),
        ArithOp::Mul => lhs.try_mul(rhs),
        ArithOp::Div => lhs.try_div(rhs),
    }
}

pub fn jet_partial(jet: &Jet, alpha: &[u8]) -> Result<f64> {
    jet.partial(alpha)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet shape mismatch")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet shape mismatch")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet shape mismatch")
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
