use thiserror::Error;

/// Errors raised by the learning pipeline.
#[derive(Debug, Error)]
pub enum FscilError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("degenerate vector: {0}")]
    Degenerate(String),
    #[error("missing class: {0}")]
    MissingClass(String),
    #[error("unknown or duplicate label: {0}")]
    Label(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("insufficient samples: {0}")]
    Capacity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FscilError> = std::result::Result<T, E>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::FscilError::$variant(format!($($arg)*)))
    };
}
pub(crate) use bail;
