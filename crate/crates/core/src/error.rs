use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A catalog object was built with parameters that break its invariants.
    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },

    /// A structural precondition does not hold (e.g. forward images of a
    /// non-injective map).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A scenario file does not match the schema.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// An internal consistency check failed.
    #[error("internal invariant breached: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } | Error::InvalidParameter { .. } => 2,
            Error::Domain(_) | Error::Precondition(_) => 3,
            Error::Invariant(_) => 4,
            Error::Io(_) => 2,
        }
    }
}
