use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),

    #[error("direction index {index} out of range for {count} directions")]
    Index { index: usize, count: usize },

    #[error("invalid sampling configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("evaluation failed at {point:?}: {message}")]
    Evaluation { point: Vec<f64>, message: String },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quasi-minimality test needs at least one frame value")]
    EmptyFrame,
}
