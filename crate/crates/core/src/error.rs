use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid phone set: {0}")]
    PhoneSet(String),

    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid probability values: {0}")]
    Probability(String),

    /// A phone received no prior mass, so its frame log-likelihood is undefined.
    #[error("phone '{0}' has zero prior mass")]
    ZeroMassPhone(String),

    #[error("non-finite log-likelihood at index {0}")]
    NonFinite(usize),

    #[error("cannot pool an empty frame sequence")]
    EmptyPhone,

    #[error("segment {index} of utterance '{utterance}' spans frames {start}..{end} outside 0..{frames}")]
    SegmentOutOfRange {
        utterance: String,
        index: usize,
        start: usize,
        end: usize,
        frames: usize,
    },

    #[error("segment {index} refers to unknown utterance '{utterance}'")]
    UnknownUtterance { utterance: String, index: usize },

    #[error("no trials to evaluate")]
    NoTrials,

    #[error("calibration needs at least two classes with trials, found {0}")]
    TooFewClasses(usize),

    #[error("invalid synthetic corpus config: {0}")]
    Config(String),

    #[error("transform was fitted on a different phone set")]
    PhoneSetMismatch,

    #[error("{}:{location}: {message}", path.display())]
    Format {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dimension(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
