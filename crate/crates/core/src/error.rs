use thiserror::Error;

/// Errors raised by the toolkit. Verification failures are never errors:
/// they are reported as verdicts by the operations that check them.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// The requested computation exceeds a fixed work budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Text input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A documented precondition of a theorem-level check does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
