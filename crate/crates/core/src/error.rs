use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Error)]
pub enum PinnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid sampling request: {0}")]
    Sampling(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("x = {x} is not on a wall of the domain [{x_min}, {x_max}]")]
    NotOnWall { x: f64, x_min: f64, x_max: f64 },
    #[error("nodes passed to the residual belong to different graphs")]
    MismatchedGraphs,
    #[error("loss term `{0}` has a nonzero weight but no points")]
    EmptyTerm(&'static str),
    #[error("invalid loss weights: {0}")]
    Weights(String),
    #[error("invalid optimizer configuration: {0}")]
    Optimizer(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = PinnError> = std::result::Result<T, E>;
