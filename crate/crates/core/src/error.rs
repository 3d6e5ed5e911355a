//! Error type shared across the toolkit.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or dimension disagreement between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter violates its documented domain (e.g. nonpositive weight).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative or factorization routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File could not be read or written.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// File exists but its contents violate the format contract.
    #[error("corrupt file {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },

    /// Configuration failed schema validation.
    #[error("config validation: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn corrupt(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
