use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} out of range (must be < {bound})")]
    Range {
        what: &'static str,
        value: i64,
        bound: usize,
    },

    #[error("unknown label `{0}`")]
    Lookup(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("dimension {dim} exceeds cap {cap}")]
    Resource { dim: usize, cap: usize },

    #[error("reduced Kraus family is incomplete (defect {defect:.3e})")]
    Incomplete { defect: f64 },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
