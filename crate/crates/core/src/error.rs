use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fiber specification: {0}")]
    InvalidFiber(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root bracketing failed for azimuthal order {order} near u = {near}")]
    RootIsolation { order: u32, near: f64 },

    #[error("grid extent {extent} m is smaller than 2a = {required} m")]
    InsufficientSupport { extent: f64, required: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("displacement {d} mm outside [0, {max}] mm")]
    DisplacementOutOfRange { d: f64, max: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("class id {0} outside the alphabet")]
    UnknownClass(usize),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("malformed {kind} data: {detail}")]
    Format { kind: &'static str, detail: String },

    #[error("I/O error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
