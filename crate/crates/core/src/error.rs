use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cuboid: {0}")]
    InvalidCuboid(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty instance")]
    EmptyInstance,

    #[error("instance ids required (point {index} has none)")]
    InstanceIdsRequired { index: usize },

    #[error("class vocabulary mismatch between estimate and ground truth")]
    VocabularyMismatch,

    #[error("no temporal overlap between trajectories")]
    NoTemporalOverlap,

    #[error("not enough pose pairs: need {need}, got {got}")]
    NotEnoughPairs { need: usize, got: usize },

    #[error("could not place {requested} objects after {attempts} attempts")]
    PlacementFailed { requested: usize, attempts: usize },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for file-system and format errors, as opposed to evaluation errors.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io { .. })
    }
}
