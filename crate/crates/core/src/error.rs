use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for {field}: {reason}")]
    InvalidValue { field: &'static str, reason: String },

    #[error("shape mismatch: {what} (left has {left} points, right has {right})")]
    ShapeMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("horizon {horizon}s is outside the trajectory span [{min}s, {max}s]")]
    OutOfHorizon { horizon: f64, min: f64, max: f64 },

    #[error("layer {layer} is outside [1, {total}]")]
    LayerOutOfRange { layer: usize, total: usize },

    #[error("decode failed at layer {layer}: {source}")]
    Decode {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    InTrace {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("heterogeneous layer counts: {first_id} has {first} layers, {other_id} has {other}")]
    HeterogeneousLayers {
        first_id: String,
        first: usize,
        other_id: String,
        other: usize,
    },

    #[error("degenerate anchors: {0}")]
    DegenerateAnchors(String),

    #[error("distribution does not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("cost model config: {0}")]
    Config(String),

    #[error("report serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
