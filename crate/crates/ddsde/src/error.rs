//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated an interface contract (dimension mismatch etc).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Instance too large for the requested method.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Invalid run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Numerical failure at runtime (blow-up, failed factorization, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
