use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid histogram: {0}")]
    Histogram(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate output: {0}")]
    Degenerate(String),

    #[error("empty molecule: no occupied atom slots")]
    EmptyMolecule,

    #[error("parse error at byte offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("record {index}: {msg}")]
    Record { index: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape { what, expected, got }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
