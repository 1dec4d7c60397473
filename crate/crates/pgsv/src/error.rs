//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by matrix I/O, validation, and search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic: expected \"PGSV\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file: need {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("{extra} trailing bytes after matrix payload")]
    TrailingBytes { extra: u64 },

    #[error("dimension must be at least 1")]
    ZeroDim,

    #[error("duplicate document id {0}")]
    DuplicateId(u64),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("data length {data_len} does not match {n_rows} rows x {dim} dims")]
    ShapeMismatch {
        data_len: usize,
        n_rows: usize,
        dim: usize,
    },

    #[error("prefix width {d} out of range 1..={dim}")]
    DimOutOfRange { d: usize, dim: usize },

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero-norm vector has no cosine similarity")]
    ZeroNorm,

    #[error("k must be at least 1")]
    ZeroK,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("candidate subset is empty")]
    EmptySubset,

    #[error("empty query batch")]
    EmptyQueries,

    #[error("unknown document id {0}")]
    UnknownId(u64),

    #[error("queries carry no ground truth")]
    MissingTruth,

    #[error("empty ground truth")]
    EmptyTruth,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("search produced unstable results across repeats")]
    UnstableAccuracy,
}

pub type Result<T> = std::result::Result<T, Error>;
