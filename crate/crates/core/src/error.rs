use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by dataset construction, loss evaluation, optimizers and
/// reference solvers.
#[derive(Debug, Error)]
pub enum MarginError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector: {0}")]
    ZeroVector(&'static str),

    #[error("reference direction is not unit-norm (|w*| = {norm})")]
    NonUnitReference { norm: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("rows {rows:?} have feature norm above 1 (max {max_norm}); pass the rescale option to normalize")]
    NormViolation { rows: Vec<usize>, max_norm: f64 },

    #[error("dataset is not linearly separable through the origin: {0}")]
    NonSeparable(String),

    #[error("dataset does not match the {family} family: {reason}")]
    FamilyMismatch { family: String, reason: String },

    #[error("insufficient data for rate fit: {got} usable rows, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("all margin gaps in the window are zero; nothing to fit")]
    AllZeroGap,

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MarginError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MarginError::DimensionMismatch { expected, got })
    }
}
