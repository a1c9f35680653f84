use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("invalid scale factor {scale}: output would have zero size")]
    InvalidScale { scale: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("incompatible descriptors: {0}")]
    IncompatibleDescriptors(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image {id} ({path}) failed: {source}")]
    ImageFailed {
        id: u64,
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("K = {k} is out of range 1..={len}")]
    KOutOfRange { k: usize, len: usize },

    #[error("unknown image id {0}")]
    UnknownId(u64),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("index format error: {0}")]
    Format(String),

    #[error("unsupported index version {found:?}")]
    VersionMismatch { found: u8 },

    #[error("index file is truncated")]
    Truncated,

    #[error("index checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
}
