use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad schema selector, dimension mismatch, size
    /// chaining violation, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation contract (e.g. kernel larger than the
    /// graph handed to a layer).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values encountered where finite numerics are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An operation was invoked out of order (e.g. backward without forward).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
