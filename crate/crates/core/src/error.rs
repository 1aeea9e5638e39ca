use alloc::string::String;

/// Errors raised by the model and sampler.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A conditional distribution could not be normalized or produced a
    /// non-finite value.
    #[error("numerical failure in {step}: {detail}")]
    Numerical { step: &'static str, detail: String },

    /// Raised by `run_chain` with the sweep that failed.
    #[error("chain aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(step: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            step,
            detail: detail.into(),
        }
    }

    /// True when the error (or the error it wraps) came from a numerical
    /// failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. } => true,
            Error::Aborted { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
