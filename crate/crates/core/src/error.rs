use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the graph, filter, and training stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("graph generation failed after {retries} retries")]
    GenerationFailed { retries: usize },

    #[error("requested {count} nodes but the graph only has {available}")]
    CountTooLarge { count: usize, available: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("polynomial has degree zero")]
    DegreeZero,

    #[error("entry ({row}, {col}) of parameter matrix {order} lies outside the allowed support")]
    SupportViolation {
        order: usize,
        row: usize,
        col: usize,
    },

    #[error("singular diagonal at node {node}: |D_ii - gamma| = {gap:e}")]
    SingularDiagonal { node: usize, gap: f64 },

    #[error("linear system is singular or ill-conditioned")]
    SingularSystem,

    #[error("dense path limited to {max} nodes, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("denominator has repeated poles (min separation {separation:e})")]
    RepeatedPoles { separation: f64 },

    #[error("eigenvalue {lambda} sits on a pole of the rational response")]
    PoleAtEigenvalue { lambda: f64 },

    #[error("reconstructed filter leaks {magnitude:e} outside the graph support")]
    SupportLeak { magnitude: f64 },

    #[error("incompatible dimensions: {0}")]
    IncompatibleDims(String),

    #[error("no tape recorded for node {0}")]
    MissingTape(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}:{line}: {message}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<input>".into()))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
