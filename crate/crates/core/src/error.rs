use thiserror::Error;

use crate::gabp::GabpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (nonpositive pivot at row {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix must have at least one row")]
    EmptyMatrix,

    #[error("zero pivot while computing message {from} -> {to}")]
    ZeroPivot { from: usize, to: usize },

    #[error("zero diagonal entry at row {row}; no scalar fix exists for this node")]
    ZeroDiagonal { row: usize },

    #[error("invalid label {value} for sample {index}; expected -1 or +1")]
    InvalidLabel { index: usize, value: f64 },

    #[error("sample {index} has no label")]
    MissingLabel { index: usize },

    #[error("cannot partition {n} rows over {p} workers")]
    InvalidPartition { n: usize, p: usize },

    #[error(
        "GaBP did not converge after {} sweeps (last delta {:e})",
        .0.iterations_used,
        .0.final_delta
    )]
    GabpNotConverged(Box<GabpSolution>),

    #[error("parse error at line {line}{}: {message}", .column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("feature indices must be strictly increasing (line {line})")]
    NonMonotonicIndex { line: usize },

    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
