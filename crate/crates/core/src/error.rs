use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("claimed inverse does not invert: {0}")]
    BadInverse(String),
    #[error("curves do not intersect: twistor has length 0 on the source curve")]
    DoesNotIntersect,
    #[error("search exhausted: {0}")]
    Exhausted(String),
    #[error("orbit cap exceeded ({0} points)")]
    OrbitCap(usize),
    #[error("stage {stage} failed: {reason}")]
    Stage { stage: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
