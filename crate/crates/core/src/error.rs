use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("rows without timestamps cannot be split chronologically")]
    MissingTimestamps,

    #[error("invalid split fractions {0:?}")]
    InvalidFractions((f64, f64, f64)),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("noise curve {w_minus} is not below bias curve {w_plus} at duration {d}s")]
    CurveOrderViolation { d: u32, w_plus: f64, w_minus: f64 },

    #[error("duration {d}s outside [{min}, {max}]")]
    OutOfRangeDuration { d: u32, min: u32, max: u32 },

    #[error("group has {count} rows, fewer than the minimum {min}")]
    GroupTooSmall { count: usize, min: usize },

    #[error("all {count} watch times equal {value}")]
    DegenerateGroup { value: f64, count: usize },

    #[error("no duration group has enough rows to fit")]
    NoFittableGroups,

    #[error("curve table is empty")]
    EmptyCurve,

    #[error("bias term {w_plus} does not exceed noise term {w_minus}")]
    CurveCollapse { w_plus: f64, w_minus: f64 },

    #[error("exponential correction overflowed (alpha={alpha}, w={w})")]
    NumericOverflow { alpha: f64, w: f64 },

    #[error("watch time {w} outside [{w_minus}, {w_plus}]")]
    OutOfInterval { w: f64, w_minus: f64, w_plus: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("no user has both positive and negative rows")]
    NoEvaluableUsers,

    #[error("improve percentage undefined: oracle and watch-time values are equal ({0})")]
    DegenerateDenominator(f64),

    #[error("row {0} has no ground-truth interest")]
    MissingGroundTruth(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
