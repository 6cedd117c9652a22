use alloc::string::String;
use core::fmt;

/// Errors raised by the jet, tensor and curvature pipelines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A node or operation was evaluated outside its domain.
    Domain(String),
    /// A requested derivative or truncation order is not available.
    Order { requested: usize, available: usize },
    /// Operands do not share a shape (variable count, order, dimension or rank).
    Shape(String),
    /// A metric failed the positive-definiteness check.
    SingularMetric { pivot: f64 },
    /// Contraction of two slots with the same variance.
    Variance { slot_a: usize, slot_b: usize },
    /// The dimension is outside what an operation supports.
    Dimension { dim: usize, reason: &'static str },
    /// An elementary symmetric function beyond the implemented range.
    Rank { k: usize },
    /// A metric was not positive definite at a quadrature node.
    SpdViolation { node: usize, pivot: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Order { requested, available } => {
                write!(f, "order error: requested order {requested}, available {available}")
            }
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::SingularMetric { pivot } => {
                write!(f, "metric is not positive definite (pivot {pivot:e})")
            }
            Error::Variance { slot_a, slot_b } => {
                write!(f, "cannot contract slots {slot_a} and {slot_b}: same variance")
            }
            Error::Dimension { dim, reason } => write!(f, "dimension {dim} not supported: {reason}"),
            Error::Rank { k } => write!(f, "sigma_{k} is outside the implemented range 1..=3"),
            Error::SpdViolation { node, pivot } => {
                write!(f, "metric not positive definite at grid node {node} (pivot {pivot:e})")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// Whether the error comes from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularMetric { .. } | Error::SpdViolation { .. })
    }
}
