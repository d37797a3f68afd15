use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("rank defect: {0}")]
    Rank(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 precondition, 3 verification, 4 I/O or format.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Verification(_) => 3,
            Error::Io(_) | Error::Json(_) | Error::Parse(_) => 4,
            _ => 2,
        }
    }
}
