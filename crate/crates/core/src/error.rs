use thiserror::Error;

#[derive(Debug, Error)]
pub enum LcdfError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {message} (achieved tolerance {achieved:e})")]
    Numerical { message: String, achieved: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LcdfError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LcdfError::Domain(msg.into()))
}
