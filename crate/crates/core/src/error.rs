use thiserror::Error;

/// Errors produced by the streaming PCA pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("insufficient data: need at least {needed} samples, got {actual}")]
    InsufficientData { needed: usize, actual: usize },

    #[error("variable {index} has zero variance but scaling is enabled")]
    DegenerateVariable { index: usize },

    #[error(
        "variable {index}: centered sum of squares {value:e} is negative beyond \
         round-off tolerance (upstream data corruption?)"
    )]
    NegativeVariance { index: usize, value: f64 },

    #[error("sample count mismatch: state reflects {state} samples, caller claims {claimed}")]
    CountMismatch { state: usize, claimed: usize },

    #[error("matrix shape mismatch: {rows_a}x{cols_a} vs {rows_b}x{cols_b}")]
    ShapeMismatch {
        rows_a: usize,
        cols_a: usize,
        rows_b: usize,
        cols_b: usize,
    },

    #[error("matrix is not symmetric within tolerance (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown scenario '{0}' (expected random, crossing or degenerate)")]
    InvalidScenario(String),

    #[error("csv row {row}: expected {expected} fields, got {actual}")]
    RaggedRow {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("csv row {row}, column {column}: cannot parse '{content}' as a number")]
    ParseCell {
        row: usize,
        column: String,
        content: String,
    },

    #[error("csv row {row}, column {column}: value is not finite")]
    NonFiniteCell { row: usize, column: String },

    #[error("csv input has no header row")]
    MissingHeader,

    #[error("diagnostics line {line}: {source}")]
    Diagnostics {
        line: usize,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
