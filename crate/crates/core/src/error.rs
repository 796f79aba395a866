use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid codebook config: {0}")]
    InvalidConfig(String),

    #[error("value {0} outside the quantizer domain [-1, 1]")]
    Domain(f64),

    #[error("invalid fixed-point bit width {0} (expected 2..=16)")]
    InvalidBits(u32),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("codeword index {index} out of range for stage {stage} (max {max})")]
    IndexOutOfRange { stage: usize, index: i32, max: i32 },

    #[error("input value {0} exceeds the 8-bit datapath width")]
    InputWidthExceeded(i32),

    #[error("accumulator overflow at output channel {channel}")]
    AccumulatorOverflow { channel: usize },

    #[error("empty tensor")]
    EmptyTensor,

    #[error("no inputs")]
    NoInputs,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("bad magic: expected SHCT")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("blob-length-mismatch: {blob} holds {found} bytes, expected {expected}")]
    BlobLengthMismatch { blob: String, expected: usize, found: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
