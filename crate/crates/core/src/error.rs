use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("{op}: {reason}")]
    InvalidInput { op: &'static str, reason: String },

    #[error("architecture infeasible: stage {stage} would produce {detail}")]
    Infeasible { stage: usize, detail: String },

    #[error("truncated CIFAR-10 file: {len} bytes, last complete record ends at byte {offset}")]
    TruncatedFile { offset: usize, len: usize },

    #[error("corrupt CIFAR-10 record {index} at byte {offset}: label byte {label} > 9")]
    CorruptRecord { index: usize, offset: usize, label: u8 },

    #[error("{path}: expected {expected} bytes, found {found}")]
    FileSize { path: PathBuf, expected: u64, found: u64 },

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("no reuse possible: {0} has a single convolutional layer")]
    NoReuse(String),

    #[error("incompatible reuse shapes: source layer output {source_shape:?} vs target layer input {target_shape:?}")]
    IncompatibleShapes {
        source_shape: Vec<usize>,
        target_shape: Vec<usize>,
    },

    #[error("weight record {0} already exists")]
    DuplicateRecord(String),

    #[error("weight record {0} not found")]
    MissingRecord(String),

    #[error("corrupt weight file {id}: {reason}")]
    CorruptWeights { id: String, reason: String },

    #[error("backward called without a cached forward pass")]
    MissingCache,

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("grid file: {0}")]
    GridFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            op,
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }

    pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            op,
            reason: reason.into(),
        }
    }
}
