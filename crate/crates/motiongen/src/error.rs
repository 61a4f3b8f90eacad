use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensor ops, motion evaluation, training, and I/O.
#[derive(Debug)]
pub enum Error {
    /// Tensor shapes do not line up for the requested operation.
    Shape(String),
    /// A configuration value is invalid or inconsistent.
    Config(String),
    /// An input is outside the operation's domain (non-finite time, etc.).
    Domain(String),
    /// An API contract was violated (non-scalar loss, bad call order).
    Contract(String),
    /// A numeric failure: NaN/Inf detected, non-PSD covariance, divergence.
    Numerics(String),
    /// Checkpoint contents do not match the model being loaded.
    Checkpoint(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Contract(msg) => write!(f, "contract error: {msg}"),
            Error::Numerics(msg) => write!(f, "numerics error: {msg}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

macro_rules! err_ctor {
    ($name:ident, $variant:ident) => {
        pub fn $name(msg: impl Into<String>) -> Self {
            Error::$variant(msg.into())
        }
    };
}

impl Error {
    err_ctor!(shape, Shape);
    err_ctor!(config, Config);
    err_ctor!(domain, Domain);
    err_ctor!(contract, Contract);
    err_ctor!(numerics, Numerics);
    err_ctor!(checkpoint, Checkpoint);
}
