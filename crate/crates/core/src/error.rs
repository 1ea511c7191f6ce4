use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (jitter cap {max_jitter:e} exceeded)")]
    NonPositiveDefinite { max_jitter: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("model has no fitted last layer")]
    NotFitted,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient Monte Carlo draws: need at least {needed}, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("{function} is undefined at the given point")]
    SingularPoint { function: &'static str },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed data at row {row}, column {column}: {message}")]
    MalformedData {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
