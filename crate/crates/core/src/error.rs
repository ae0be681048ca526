use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate review id {0:?}")]
    DuplicateReview(String),

    #[error("photo owned by two reviews: {photo:?} appears in {first:?} and {second:?}")]
    PhotoOwnership {
        photo: String,
        first: String,
        second: String,
    },

    #[error("photo {photo:?} listed twice in review {review:?}")]
    DuplicatePhotoInReview { review: String, photo: String },

    #[error("invalid feature file: {0}")]
    FeatureFormat(String),

    #[error("duplicate feature record for photo {0:?}")]
    DuplicateFeature(String),

    #[error("no feature vector for photo {0:?}")]
    MissingFeature(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("unknown item {0:?}")]
    UnknownItem(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no negative pool exists for user {user:?} photo {photo:?}")]
    NoNegativePool { user: String, photo: String },

    #[error("empty training set")]
    EmptyTrainSet,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("no cases left to evaluate")]
    NoCases,

    #[error("index {index} out of range for ranking of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("NaN score for photo {0:?}")]
    NanScore(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
