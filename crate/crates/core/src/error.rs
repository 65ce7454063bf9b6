use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A bounded search ran out of candidates.
    #[error("search exhausted: {what} (bound {bound})")]
    SearchExhausted { what: String, bound: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// A decision oracle answered the same key in two different ways.
    #[error("oracle inconsistency at level {level}, K = {k:?}: {detail}")]
    OracleInconsistency { level: usize, k: Vec<u64>, detail: String },

    #[error("no monochromatic strong subtree of height {height} in the truncated tree")]
    NoSubtreeFound { height: usize },
}

impl Error {
    pub(crate) fn exhausted(what: impl Into<String>, bound: usize) -> Self {
        Error::SearchExhausted {
            what: what.into(),
            bound,
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::PreconditionViolation(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SearchExhausted { .. } => "SearchExhausted",
            Error::PreconditionViolation(_) => "PreconditionViolation",
            Error::OracleInconsistency { .. } => "OracleInconsistency",
            Error::NoSubtreeFound { .. } => "NoSubtreeFound",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
