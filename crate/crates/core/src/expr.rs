//! Expression trees for metric components and conformal factors.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{Elementary, Jet, JetSpace};

#[derive(Debug, Clone, PartialEq)]
pub enum ExpressionTree {
    Const(f64),
    /// Zero-based coordinate index.
    Coord(usize),
    Add(Vec<ExpressionTree>),
    Mul(Vec<ExpressionTree>),
    Div(Box<ExpressionTree>, Box<ExpressionTree>),
    /// Real (typically rational) power of a subtree.
    Pow(Box<ExpressionTree>, f64),
    Exp(Box<ExpressionTree>),
    Log(Box<ExpressionTree>),
    Sin(Box<ExpressionTree>),
    Cos(Box<ExpressionTree>),
}

impl ExpressionTree {
    pub fn constant(v: f64) -> Self {
        ExpressionTree::Const(v)
    }

    pub fn coord(i: usize) -> Self {
        ExpressionTree::Coord(i)
    }

    pub fn sum(terms: Vec<ExpressionTree>) -> Self {
        ExpressionTree::Add(terms)
    }

    pub fn product(terms: Vec<ExpressionTree>) -> Self {
        ExpressionTree::Mul(terms)
    }

    pub fn quotient(num: ExpressionTree, den: ExpressionTree) -> Self {
        ExpressionTree::Div(Box::new(num), Box::new(den))
    }

    pub fn pow(self, exponent: f64) -> Self {
        ExpressionTree::Pow(Box::new(self), exponent)
    }

    pub fn exp(self) -> Self {
        ExpressionTree::Exp(Box::new(self))
    }

    pub fn log(self) -> Self {
        ExpressionTree::Log(Box::new(self))
    }

    pub fn sin(self) -> Self {
        ExpressionTree::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        ExpressionTree::Cos(Box::new(self))
    }

    pub fn scaled(self, factor: f64) -> Self {
        ExpressionTree::Mul(alloc::vec![ExpressionTree::Const(factor), self])
    }

    /// `Σ x_i²` over the first `n` coordinates.
    pub fn radius_squared(n: usize) -> Self {
        ExpressionTree::Add((0..n).map(|i| ExpressionTree::Coord(i).pow(2.0)).collect())
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            ExpressionTree::Const(_) => None,
            ExpressionTree::Coord(i) => Some(*i),
            ExpressionTree::Add(ts) | ExpressionTree::Mul(ts) => {
                ts.iter().filter_map(|t| t.max_coord()).max()
            }
            ExpressionTree::Div(a, b) => a.max_coord().max(b.max_coord()),
            ExpressionTree::Pow(a, _)
            | ExpressionTree::Exp(a)
            | ExpressionTree::Log(a)
            | ExpressionTree::Sin(a)
            | ExpressionTree::Cos(a) => a.max_coord(),
        }
    }

    /// Plain pointwise evaluation.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Ok(match self {
            ExpressionTree::Const(v) => *v,
            ExpressionTree::Coord(i) => *point
                .get(*i)
                .ok_or_else(|| Error::Shape(alloc::format!("coordinate {i} out of range")))?,
            ExpressionTree::Add(ts) => {
                let mut s = 0.0;
                for t in ts {
                    s += t.eval(point)?;
                }
                s
            }
            ExpressionTree::Mul(ts) => {
                let mut p = 1.0;
                for t in ts {
                    p *= t.eval(point)?;
                }
                p
            }
            ExpressionTree::Div(a, b) => {
                let d = b.eval(point)?;
                if d == 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                a.eval(point)? / d
            }
            ExpressionTree::Pow(a, e) => {
                let base = a.eval(point)?;
                let integral = libm::trunc(*e) == *e;
                if (!integral && base <= 0.0) || (base == 0.0 && *e < 0.0) {
                    return Err(Error::Domain(alloc::format!("{base} raised to power {e}")));
                }
                libm::pow(base, *e)
            }
            ExpressionTree::Exp(a) => libm::exp(a.eval(point)?),
            ExpressionTree::Log(a) => {
                let v = a.eval(point)?;
                if v <= 0.0 {
                    return Err(Error::Domain(alloc::format!("log of non-positive value {v}")));
                }
                libm::log(v)
            }
            ExpressionTree::Sin(a) => libm::sin(a.eval(point)?),
            ExpressionTree::Cos(a) => libm::cos(a.eval(point)?),
        })
    }

    /// Taylor jet of the expression at `point` in the variables of `space`.
    ///
    /// Coordinates at or beyond `space.n_vars()` are treated as frozen at
    /// their value in `point`.
    pub fn jet_in(&self, space: &Arc<JetSpace>, point: &[f64], order: usize) -> Result<Jet> {
        match self {
            ExpressionTree::Const(v) => Jet::constant(space, order, *v),
            ExpressionTree::Coord(i) => {
                let v = *point
                    .get(*i)
                    .ok_or_else(|| Error::Shape(alloc::format!("coordinate {i} out of range")))?;
                if *i < space.n_vars() {
                    Jet::variable(space, order, *i, v)
                } else {
                    Jet::constant(space, order, v)
                }
            }
            ExpressionTree::Add(ts) => {
                let mut acc = Jet::zeros(space, order)?;
                for t in ts {
                    acc = acc.try_add(&t.jet_in(space, point, order)?)?;
                }
                Ok(acc)
            }
            ExpressionTree::Mul(ts) => {
                let mut acc = Jet::constant(space, order, 1.0)?;
                for t in ts {
                    acc = acc.try_mul(&t.jet_in(space, point, order)?)?;
                }
                Ok(acc)
            }
            ExpressionTree::Div(a, b) => {
                a.jet_in(space, point, order)?.try_div(&b.jet_in(space, point, order)?)
            }
            ExpressionTree::Pow(a, e) => a.jet_in(space, point, order)?.apply(Elementary::Pow(*e)),
            ExpressionTree::Exp(a) => a.jet_in(space, point, order)?.apply(Elementary::Exp),
            ExpressionTree::Log(a) => a.jet_in(space, point, order)?.apply(Elementary::Log),
            ExpressionTree::Sin(a) => a.jet_in(space, point, order)?.apply(Elementary::Sin),
            ExpressionTree::Cos(a) => a.jet_in(space, point, order)?.apply(Elementary::Cos),
        }
    }
}

/// Jet of `e` at `point` in all `point.len()` coordinates.
pub fn jet_of_expression(e: &ExpressionTree, point: &[f64], order: i64) -> Result<Jet> {
    if order < 0 {
        return Err(Error::Order { requested: 0, available: 0 });
    }
    let order = order as usize;
    let space = JetSpace::new(point.len(), order)?;
    e.jet_in(&space, point, order)
}
