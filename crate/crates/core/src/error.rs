use thiserror::Error;

use crate::series::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit mismatch: expected {expected:?}, found {found:?}")]
    UnitMismatch { expected: Unit, found: Unit },

    #[error("insufficient data: series length {len} < window {window} + interval {interval}")]
    InsufficientData {
        len: usize,
        window: usize,
        interval: usize,
    },

    #[error("degenerate range: min == max == {0}")]
    DegenerateRange(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("ensemble member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration requested but the model has no fitted scaling factor")]
    MissingCalibration,

    #[error("checkpoint schema version {found} is not supported (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short code, used by the CLI as a machine-parseable exit tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnitMismatch { .. } => "unit_mismatch",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateRange(_) => "degenerate_range",
            Error::Shape(_) => "shape_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "numeric",
            Error::Diverged { .. } => "diverged",
            Error::Member { source, .. } => source.code(),
            Error::MissingCalibration => "missing_calibration",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Checkpoint(_) => "checkpoint",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
