use thiserror::Error;

use crate::domain::RegionId;

pub type Result<T> = std::result::Result<T, FairError>;

#[derive(Debug, Error)]
pub enum FairError {
    /// Shapes, ranges or preconditions violated by the caller.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A region ended up with no sampled sensor when forming regional values.
    #[error("region {0} has no sampled sensor")]
    EmptyRegion(RegionId),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    /// Malformed input file; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FairError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        FairError::InvalidInput(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        FairError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
