use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid instance at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration cap exceeded: {count} candidates > cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("simplex exceeded the iteration cap of {0}")]
    IterationLimit(usize),

    #[error("separation did not converge within {rounds} rounds")]
    RoundsExhausted { rounds: usize, last_point: Vec<f64> },

    #[error("separation oracle returned a cut that is already present (row {0})")]
    DuplicateCut(usize),

    #[error("LP is {0}")]
    LpStatus(&'static str),

    /// A proved structural property failed; indicates an arithmetic or logic bug.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invariant(message: impl Into<String>) -> Self {
        Error::Invariant(message.into())
    }
}

/// Returns an [`Error::Invariant`] when `cond` is false.
macro_rules! ensure_invariant {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Invariant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure_invariant;
