use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{field}: value {value} at index {index} is not a finite value in [0, 1]")]
    DataRange {
        field: &'static str,
        index: usize,
        value: f32,
    },

    #[error("raw tensor format error: {0}")]
    Format(String),

    #[error("unsupported raw tensor version {0} (expected 1)")]
    UnsupportedVersion(u8),

    #[error("truncated raw tensor: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("i/o error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: io::Error,
    },

    #[error("crop rect {0} exceeds the source frame")]
    Bounds(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("replay error: {0}")]
    Replay(String),

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
