//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Bad or inconsistent input data (corpus files, checkpoints, profiles).
    #[error("data error: {0}")]
    Data(String),
    /// Bad configuration or usage (flag values, dimension mismatches).
    #[error("config error: {0}")]
    Config(String),
    /// Numerical failure during training (NaN/Inf gradients, diverged loss).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Text contains no characters from any supported script.
    #[error("unknown language: {0}")]
    UnknownLanguage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
