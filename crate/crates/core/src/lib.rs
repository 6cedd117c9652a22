//! Truncated Taylor jets, pointwise curvature and the conformal curvature
//! invariants `v^(2)`, `v^(4)`, `v^(6)`, together with the checks that tie
//! them to the Schouten, Cotton, Weyl and Bach tensors.
//!
//! The crate is `no_std` and only needs `alloc`. IO, random sampling and the
//! command line live in the `confinv` companion crate.

#![no_std]

extern crate alloc;

pub mod catalog;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod invariants;
pub mod jet;
pub mod metric;
pub mod tensor;
pub mod variation;

pub use curvature::{CurvatureBundle, Christoffel};
pub use error::{Error, Result};
pub use expr::{jet_of_expression, ExpressionTree};
pub use invariants::{InvariantSet, PowerSeries};
pub use jet::{jet_arith, jet_partial, ArithOp, Jet, JetSpace};
pub use metric::MetricJet;
pub use tensor::{PointTensor, Variance};
