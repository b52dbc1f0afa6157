use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point id {0}")]
    InvalidPoint(usize),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("metric needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("distance matrix is not symmetric at ({row}, {col}): {a} vs {b}")]
    Asymmetric { row: usize, col: usize, a: f64, b: f64 },

    #[error("negative distance {value} at ({row}, {col})")]
    NegativeDistance { row: usize, col: usize, value: f64 },

    #[error("triangle inequality violated on ({0}, {1}, {2})")]
    TriangleViolation(usize, usize, usize),

    #[error("source {0} is in the forbidden set")]
    SourceForbidden(usize),

    #[error("nodes of a cross set must share one level (found {0} and {1})")]
    MixedLevels(usize, usize),

    #[error("endpoints must differ (got {0} twice)")]
    SamePoint(usize),

    #[error("surrogate set is empty")]
    EmptySurrogateSet,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("complete node ({point}, {level}) received only {size} surrogates")]
    IncompleteSurrogates { point: usize, level: usize, size: usize },

    #[error("artificial leaf of ({point}, {level}) holds {size} points, capacity is {cap}")]
    SsListOverflow {
        point: usize,
        level: usize,
        size: usize,
        cap: usize,
    },

    #[error("exhaustive check needs {needed} fault sets, budget is {budget}; use sampled mode")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("graph file does not match metric: {0}")]
    GraphMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
