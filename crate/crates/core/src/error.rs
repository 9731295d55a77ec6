use thiserror::Error;

/// Errors raised by the library. CLI-level failures map onto exit codes in `cli`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point lies outside the support box")]
    OutsideSupport,

    #[error("quadrature is limited to d <= 2 (got d = {0}); use Monte Carlo")]
    UnsupportedDimension(usize),

    #[error("quadrature budget exhausted: best estimate {estimate} with error estimate {error_estimate}")]
    Convergence { estimate: f64, error_estimate: f64 },

    #[error("non-finite integrand value at sample {index} (point {point:?})")]
    NonFinite { index: usize, point: Vec<f64> },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("linear minimization oracle failed: {0}")]
    OracleFailure(String),

    #[error("line {line}: {message}")]
    Dataset { line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
