//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/vector shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration value is outside its valid range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation was called before its prerequisites exist
    /// (e.g. a backward walk without a recorded forward trace).
    #[error("state error: {0}")]
    State(String),

    /// Input data violates a dataset-level contract.
    #[error("data error: {0}")]
    Data(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    /// A linear solve or similar numeric routine failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Model file carries a format version this build does not understand.
    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    /// A file could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let message = e.to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => Error::Parse(message),
        }
    }
}
