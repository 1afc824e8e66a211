use std::path::PathBuf;

use thiserror::Error;

use crate::theory::DiscreteJoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("target has mass at ({x}, {y}) where the source has none")]
    SupportViolation { x: usize, y: usize },

    #[error("importance table admits no positive rank-1 factorization")]
    NotFactorizable,

    #[error("support splits into {components} disconnected blocks; factorization is not unique up to scale")]
    AmbiguousSupport { components: usize },

    #[error("|X| = {nx} exceeds the partition enumeration bound {limit}")]
    SizeLimit { nx: usize, limit: usize },

    #[error("counterexample found in trial {trial}")]
    CounterexampleFound {
        trial: usize,
        source_table: Box<DiscreteJoint>,
        target_table: Box<DiscreteJoint>,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient at parameter {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
