use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("sample {0}: label count does not match token count")]
    LabelLengthMismatch(String),

    #[error("sample {id}: unknown label {name:?}")]
    UnknownLabel { id: String, name: String },

    #[error("duplicate sample id {0}")]
    DuplicateId(String),

    #[error("sample {id}: {reason}")]
    InvalidSample { id: String, reason: String },

    #[error("sample {0}: kind differs from the rest of the dataset")]
    MixedKinds(String),

    #[error("sample {0}: labels must be present on every sample or on none")]
    PartialLabels(String),

    #[error("invalid label vocabulary: {0}")]
    InvalidVocab(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("training data carries no labels")]
    UnlabeledData,

    #[error("loss became non-finite")]
    NonFiniteLoss,

    #[error("warm-up seeds must be distinct")]
    DuplicateSeeds,

    #[error("position {pos} out of range for sequence of length {len}")]
    IndexOutOfRange { pos: usize, len: usize },

    #[error("mixture fit needs at least two samples, got {0}")]
    TooFewSamples(usize),

    #[error("pseudo-labeled sets use different label vocabularies")]
    MismatchedVocab,

    #[error("at least one dataset size is required")]
    EmptySizes,

    #[error("dataset {0} has size zero")]
    ZeroSize(usize),

    #[error("epoch {0} is outside 1..=3")]
    EpochOutOfRange(usize),

    #[error("expected {expected} per-epoch distillation factors, got {got}")]
    ConfigArityMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("label sequence violates IOB2: {0}")]
    SchemeViolation(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("checkpoint {path}: {reason}")]
    BadCheckpoint { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::ConfigInvalid(msg.into())
    }
}
