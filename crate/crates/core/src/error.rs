use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A special function was evaluated outside its real domain.
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    /// A parameter or argument violates its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix/vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scenario file key is missing, unknown, or out of range.
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { func, msg: msg.into() }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }
}
