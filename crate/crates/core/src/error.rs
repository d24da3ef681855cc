//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },

    #[error("duplicate record id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no triplets could be mined: all {skipped} anchors lacked a qualifying positive or negative")]
    NoTriplets { skipped: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("zero-norm embedding for record {0:?}")]
    ZeroEmbedding(String),

    #[error("k = {k} exceeds the {available} available candidates (store size {store_size})")]
    KTooLarge {
        k: usize,
        available: usize,
        store_size: usize,
    },

    #[error("unknown record id {0:?}")]
    UnknownId(String),

    #[error("template field `{0}` is missing or lacks its placeholder")]
    MissingTemplateField(&'static str),

    #[error("generator transport failure: {0}")]
    Transport(String),

    #[error("could not parse generator field `{field}`: {message} (raw response: {raw:?})")]
    Response {
        field: String,
        message: String,
        raw: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
