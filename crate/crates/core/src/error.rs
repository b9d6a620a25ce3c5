use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("corrupted CSE set: {0}")]
    CorruptedSet(String),

    #[error("inconsistent encode inputs: {0}")]
    Consistency(String),

    #[error("overlapping coverage at cell ({row}, {col})")]
    OverlappingCoverage { row: usize, col: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated stream: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
