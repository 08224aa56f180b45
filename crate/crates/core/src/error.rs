use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A ledger invariant was found broken. Reaching this is a bug.
    #[error("integrity failure: {0}")]
    IntegrityFailure(String),

    #[error("training failed: {0}")]
    TrainingFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("log parse error on line {line}: {message}")]
    LogParse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
