use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum SchnsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("linear solve failed: {context} (residual {residual:.3e} after {iterations} iterations)")]
    Solver {
        context: String,
        residual: f64,
        iterations: usize,
    },

    #[error("state error: {0}")]
    State(String),

    #[error("solution diverged at t = {t}: {detail}")]
    Diverged { t: f64, detail: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config constraint violated for `{key}`: {message}")]
    Constraint { key: String, message: String },

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("checkpoint refused: {0}")]
    CheckpointRefused(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SchnsError>;
