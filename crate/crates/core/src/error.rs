use thiserror::Error;

/// Failures raised by the matrix layer, the inverse routines and the theorem checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix has {found} entries, expected {rows}x{cols}")]
    EntryCount {
        rows: usize,
        cols: usize,
        found: usize,
    },

    #[error("matrix dimensions must be positive")]
    EmptyMatrix,

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular at the configured tolerance")]
    Singular,

    #[error("group inverse does not exist (index {index})")]
    NoGroupInverse { index: usize },

    #[error("core inverse does not exist (index {index})")]
    NoCoreInverse { index: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("not an orthogonal projection")]
    NotAProjection,

    #[error("operands do not commute")]
    NotCommuting,

    #[error("instance generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
