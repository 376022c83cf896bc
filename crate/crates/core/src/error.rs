use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("argument {value} lies outside the declared domain [{lo}, {hi}]")]
    DomainViolation { value: f64, lo: f64, hi: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} needs {size} entries/columns, above the cap of {cap}")]
    CapExceeded { what: String, size: u128, cap: u128 },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("relative error is undefined for a reference with zero max-norm")]
    UndefinedRelative,

    #[error("matrix is not positive-definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error("linear algebra backend failure: {0}")]
    Backend(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
