use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (shapes, non-finite values, labels).
    #[error("input error: {0}")]
    Input(String),

    /// A document or table could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Invalid configuration or hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Learner could not be fit on the data it was given.
    #[error("fit error: {0}")]
    Fit(String),

    /// Counterfactual estimation failed (arm too small, bad folds, non-finite result).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Exhaustive search refused an instance above its size guard.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// An internal invariant was violated.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    /// Process exit code used by the command-line tool for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Parse(_) | Error::Io(_) => 2,
            Error::Config(_) | Error::TooLarge(_) => 3,
            Error::Fit(_) | Error::Estimation(_) => 2,
            Error::Internal(_) => 4,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
