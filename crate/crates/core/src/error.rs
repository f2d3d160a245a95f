use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (ridge fallback exhausted)")]
    NotPositiveDefinite,

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("empty partition: {0}")]
    EmptyPartition(String),

    #[error("empty file: {}", .0.display())]
    EmptyFile(PathBuf),

    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}, column `{column}`: non-numeric value `{value}`")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
