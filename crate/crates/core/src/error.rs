use thiserror::Error;

/// Errors raised by tensor operations and the reverse-mode graph.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("degenerate mask in {op}: no valid position")]
    DegenerateMask { op: &'static str },
    #[error("target is not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("index {index} out of range for extent {extent} in {op}")]
    OutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {detail}")]
    Parse { context: String, detail: String },
    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint incompatible with configuration: {0}")]
    Incompatible(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("missing precomputed vectors for {id} ({role})")]
    MissingVectors { id: String, role: String },
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("missing gradient for parameter {0}")]
    MissingGrad(String),
    #[error("task mismatch: {0}")]
    TaskMismatch(String),
}

impl SainError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SainError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = SainError> = std::result::Result<T, E>;
