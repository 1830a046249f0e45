use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },
    #[error("solver integrity: {0}")]
    Integrity(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
