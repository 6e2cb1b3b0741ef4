use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("worker {0:?} is banned")]
    Banned(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("event log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },

    #[error("service is shutting down")]
    Shutdown,

    #[error(transparent)]
    Core(#[from] influence_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
