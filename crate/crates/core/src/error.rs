use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: timestamp {timestamp} goes backwards by more than the tolerance")]
    NonMonotone { line: u64, timestamp: String },

    #[error("nothing to anchor interpolation: series has no present values")]
    NothingToAnchor,

    #[error("direction undefined: (cos, sin) pair is too close to the origin")]
    DirectionUndefined,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row not constructible at {time}: {reason}")]
    RowNotConstructible { time: String, reason: String },

    #[error("feature count mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("missing model for lead time {lead}: {detail}")]
    MissingLead { lead: u32, detail: String },

    #[error("missing member prediction: member {member}, lead {lead}, time {time}")]
    MissingMember {
        member: String,
        lead: u32,
        time: String,
    },

    #[error("generator could not reach the dangerous-hour target: wanted {target:.4}, achieved {achieved:.4}")]
    UnattainableRate { target: f64, achieved: f64 },

    #[error("unsupported artifact version {found} (expected {expected})")]
    ArtifactVersion { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
