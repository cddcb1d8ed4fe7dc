use thiserror::Error;

#[derive(Debug, Error)]
pub enum RmlError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("reaction solve did not converge: residual {residual:e} after {iters} iterations")]
    ReactionNonConvergence { residual: f64, iters: usize },

    #[error("solver produced a non-finite value at step {step}")]
    NonFiniteField { step: usize },

    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("capacity problem: {0}")]
    InvalidCapacityProblem(String),

    #[error("LP oracle: {0}")]
    LpFailure(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
