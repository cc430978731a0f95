use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?} (h, w), found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("value {value} at index {index} is outside the allowed range")]
    RangeViolation { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("region mask selects no pixels")]
    EmptyRegion,
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sequence needs at least {required} frames, got {found}")]
    SequenceTooShort { required: usize, found: usize },
    #[error("image {height}x{width} is smaller than the {rows}x{cols} grid")]
    ImageTooSmall {
        height: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
    #[error("mask `{0}` is empty")]
    EmptyMask(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("image dimensions {0}x{1} overflow the supported size")]
    DimensionOverflow(usize, usize),
    #[error("schema violation at `{pointer}`: {message}")]
    SchemaViolation { pointer: String, message: String },
    #[error("duplicate frame id `{0}`")]
    DuplicateFrameId(String),
    #[error("missing input for frame `{frame}`: {what}")]
    MissingInput { frame: String, what: String },
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
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

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
