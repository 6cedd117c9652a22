use confinv_core::Error as CoreError;
use serde_json::json;

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_BREACH: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Malformed or out-of-range input.
    #[error("{0}")]
    Input(String),
    /// The input was accepted but a computation broke down.
    #[error("{0}")]
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    /// Error raised while building a metric from user input: positive
    /// definiteness failures are numerical, everything else is bad input.
    pub fn at_load(e: CoreError) -> Failure {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(format!("{} ({})", e, kind(&e)))
        }
    }

    /// Error raised after the input was accepted.
    pub fn at_compute(e: CoreError) -> Failure {
        match e {
            CoreError::Dimension { .. } | CoreError::Rank { .. } => Failure::Input(e.to_string()),
            _ => Failure::Numerical(format!("{} ({})", e, kind(&e))),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (tag, msg) = match self {
            Failure::Input(m) => ("input", m),
            Failure::Numerical(m) => ("numerical", m),
        };
        json!({ "error": { "class": tag, "message": msg, "exit_code": self.exit_code() } })
    }
}

/// Name of the core error variant.
pub fn kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::Domain(_) => "DomainError",
        CoreError::Order { .. } => "OrderError",
        CoreError::Shape(_) => "ShapeError",
        CoreError::SingularMetric { .. } => "SingularMetricError",
        CoreError::Variance { .. } => "VarianceError",
        CoreError::Dimension { .. } => "DimensionError",
        CoreError::Rank { .. } => "RankError",
        CoreError::SpdViolation { .. } => "SPDViolation",
    }
}

pub type CliResult<T> = Result<T, Failure>;
