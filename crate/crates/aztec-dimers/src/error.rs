//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (wrong parity, off-lattice, on a branch cut).
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid configuration parameters such as a size that is not a multiple of 4.
    #[error("config error: {0}")]
    Config(String),
    /// Numerical failure: singular matrix, unstable quadrature, missing bracket.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Requested work exceeds a configured cap.
    #[error("resource error: {0}")]
    Resource(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
