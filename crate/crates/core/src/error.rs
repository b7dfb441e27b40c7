use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PLY header at line {line}: {message}")]
    PlyHeader { line: usize, message: String },

    #[error("PLY vertex element is missing properties {missing:?}; expected {expected:?}")]
    PlySchema {
        missing: Vec<String>,
        expected: Vec<String>,
    },

    #[error("PLY body truncated: expected {expected} vertices, read {read}")]
    PlyTruncated { expected: usize, read: usize },

    #[error("non-finite value in property `{property}` of vertex {index}")]
    NonFinite { index: usize, property: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate covariance: smallest eigenvalue {lambda2} is not positive")]
    DegenerateCovariance { lambda2: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
