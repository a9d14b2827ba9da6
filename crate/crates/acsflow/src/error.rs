use thiserror::Error;

/// Errors surfaced by the library and the batch CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("Cayley chart out of range: {0}")]
    ChartOutOfRange(String),
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),
    #[error("flow diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error("gradient step failure: {0}")]
    StepFailure(String),
    #[error("field is not reducible to a sphere-valued map: {0}")]
    NotReducible(String),
    #[error("mixed chirality across the grid: {0}")]
    Chirality(String),
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
