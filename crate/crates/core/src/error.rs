use std::path::PathBuf;

use thiserror::Error;

use crate::cubes::CubeId;

/// Errors raised by constructions and checks in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("set is not {separation}-separated: d({a}, {b}) = {distance}")]
    NotSeparated {
        separation: f64,
        a: usize,
        b: usize,
        distance: f64,
    },

    #[error("nets are not nested: point {point} is in level {level} but not in level {next}")]
    NotNested { level: i32, next: i32, point: usize },

    #[error("level {level} is outside the range [{k_min}, {k_max}]")]
    LevelOutOfRange { level: i32, k_min: i32, k_max: i32 },

    #[error("unknown cube {0:?}")]
    UnknownCube(CubeId),

    #[error("radius {radius} is outside the realizable scale range ({reason})")]
    RadiusOutOfRange { radius: f64, reason: String },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid cube map: {0}")]
    InvalidTau(String),

    #[error("dyadic system is inconsistent: {0}")]
    InvalidSystem(String),

    #[error("system is not a canonical torus grid system")]
    NotCanonical,

    #[error("haar expansion needs singleton leaves; cube {0:?} has {1} members")]
    LeavesNotSingletons(CubeId, usize),

    #[error("coefficient at {0:?} is outside the operator domain")]
    OutsideDomain(CubeId),

    #[error("exact sign enumeration supports at most 20 summands, got {0}")]
    TooManySummands(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
