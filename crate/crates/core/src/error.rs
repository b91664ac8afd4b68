use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid task spec: {0}")]
    InvalidTaskSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot split dataset: {0}")]
    Split(String),

    #[error("non-finite loss {value} at epoch {epoch}, step {step}")]
    NonFiniteLoss { value: f64, epoch: usize, step: usize },

    #[error("model with capacity {capacity} has no trunk layers")]
    NoTrunk { capacity: usize },

    #[error("concept has a single class; need at least {needed} examples of each class")]
    SingleClass { needed: usize },

    #[error("PGR undefined: strong ceiling equals weak performance ({0})")]
    UndefinedPgr(f64),

    #[error("degenerate paired t-test: differences have zero variance")]
    DegenerateTest,

    #[error("missing configuration: {0}")]
    MissingConfiguration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed {what} at {path}:{line}: {reason}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
