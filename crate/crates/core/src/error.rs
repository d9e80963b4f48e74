use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// A numerical contract (unitarity, eigenpair residual, ...) was breached.
    #[error("{what}: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Contract {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("eigen-decomposition failed at momentum sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("QR iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("malformed grid dump: {0}")]
    Dump(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for errors that signal a breached numerical contract rather than
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Contract { .. } | Error::NoConvergence(_) => true,
            Error::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
