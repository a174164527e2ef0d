use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("malformed game: {0}")]
    MalformedGame(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("best-response reconstruction mismatch: milp objective {milp}, recomputed {recomputed}")]
    ReconstructionMismatch { milp: f64, recomputed: f64 },

    #[error("enumeration too large: {size} exceeds cap {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
