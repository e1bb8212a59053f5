use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no feasible point found after {steps} back-off steps from {start}")]
    NoFeasiblePoint { start: f64, steps: usize },

    #[error("bracket not found in stage {stage} after {iterations} expansions")]
    BracketNotFound { stage: u8, iterations: usize },

    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("particle system collapsed at step {step}: every weight is zero")]
    Collapse { step: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("every replication failed; first error: {0}")]
    AllReplicationsFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
