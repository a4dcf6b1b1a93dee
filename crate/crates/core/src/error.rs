//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("{context}: non-finite value at element {index}")]
    NonFinite { context: String, index: usize },

    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("code length {got} unsupported, must be one of 16, 32, 64, 128")]
    CodeLengthUnsupported { got: usize },

    #[error("code length mismatch: {left} bits vs {right} bits")]
    BitsMismatch { left: usize, right: usize },

    #[error("modality `{name}` missing from input batch")]
    MissingModality { name: String },

    #[error("unknown {kind} `{name}`, available: {available:?}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: Vec<&'static str>,
    },

    #[error("unknown split `{name}`, expected training, retrieval or query")]
    UnknownSplit { name: String },

    #[error("{context}: bad magic, expected {expected:?}, found {found:?}")]
    BadMagic {
        context: String,
        expected: String,
        found: String,
    },

    #[error("{context}: unsupported format version {found}")]
    UnsupportedVersion { context: String, found: u32 },

    #[error("{context}: truncated payload")]
    Truncated { context: String },

    #[error("{context}: dimension must be positive")]
    ZeroDim { context: String },

    #[error("{context}: label byte at index {index} is {value}, must be 0 or 1")]
    InvalidLabelByte {
        context: String,
        index: usize,
        value: u8,
    },

    #[error("{context}: code row {row} has nonzero padding bits")]
    PaddingBitsSet { context: String, row: usize },

    #[error("splits `{a}` and `{b}` overlap at index {index}")]
    SplitOverlap { a: String, b: String, index: u64 },

    #[error("split `{split}` index {index} out of range for {n} samples")]
    SplitIndexOutOfRange { split: String, index: u64, n: u64 },

    #[error("modality `{modality}`: manifest declares dim {declared}, file has {found}")]
    DimMismatch {
        modality: String,
        declared: usize,
        found: usize,
    },

    #[error("modality `{modality}`: manifest expects {expected} samples, file has {found}")]
    CountMismatch {
        modality: String,
        expected: u64,
        found: u64,
    },

    #[error("label file has {found} categories, manifest declares {declared}")]
    CategoryMismatch { declared: usize, found: usize },

    #[error("query set is empty")]
    EmptyQuerySet,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }
}
