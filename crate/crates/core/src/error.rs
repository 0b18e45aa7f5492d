use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed sample set: {0}")]
    MalformedSamples(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("insufficient samples: {estimator} needs at least {needed}, got {got}")]
    InsufficientSamples {
        estimator: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("correlation undefined: input is constant")]
    ConstantInput,

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing header row")]
    MissingHeader { path: PathBuf },

    #[error("{path}: row {row} has {got} fields, header has {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}: row {row}, column `{column}` is empty")]
    EmptyCell { path: PathBuf, row: usize, column: String },

    #[error("{path}: row {row}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("column `{0}` has zero variance on the training split")]
    ZeroVariance(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedSamples(_) => "malformed_samples",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::ConstantInput => "constant_input",
            Error::Io { .. } => "io",
            Error::MissingHeader { .. } => "missing_header",
            Error::RaggedRow { .. } => "ragged_row",
            Error::EmptyCell { .. } => "empty_cell",
            Error::NonNumeric { .. } => "non_numeric",
            Error::Csv { .. } => "csv",
            Error::TooShort(_) => "too_short",
            Error::ZeroVariance(_) => "zero_variance",
            Error::EmptyDataset => "empty_dataset",
            Error::Checkpoint(_) => "checkpoint",
        }
    }
}
