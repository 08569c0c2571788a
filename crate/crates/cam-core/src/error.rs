//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands with incompatible shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An operation precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The model does not have the layer layout a method requires.
    #[error("unsupported architecture: {0}")]
    UnsupportedArchitecture(String),

    /// A file is syntactically valid but not a variant we accept.
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// Malformed bytes in a binary payload; `offset` points at the fault.
    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: u64, reason: String },

    /// Bad run configuration, detected before any compute starts.
    #[error("config error: {0}")]
    Config(String),

    /// An image source that resolves to zero images.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(offset: u64, reason: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::EmptyDataset(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::UnsupportedFormat(_) => 3,
            _ => 1,
        }
    }
}
