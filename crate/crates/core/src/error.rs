use std::path::PathBuf;

use thiserror::Error;

use crate::pose::Pose;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("operation needs at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("selector resolves to {requested} items but only {available} are available")]
    SelectorOutOfRange { requested: f64, available: usize },

    #[error("unknown corruption kind `{0}`")]
    UnknownKind(String),

    #[error("severity must be in 1..=5, got {0}")]
    InvalidSeverity(u8),

    #[error("unknown synthetic scene `{0}`")]
    UnknownScene(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("neighborhood is degenerate (all points coincide)")]
    DegenerateNeighborhood,

    #[error("registration failed with {correspondences} correspondences")]
    RegistrationFailed {
        last_pose: Box<Pose>,
        correspondences: usize,
    },

    #[error("need at least {required} frames, got {actual}")]
    TooFewFrames { required: usize, actual: usize },

    #[error("frame {0} is missing from the trajectory")]
    MissingFrame(u64),

    #[error("pair set is empty")]
    EmptyPairSet,

    #[error("trajectory length {length:.1} m is shorter than the smallest segment {segment:.1} m")]
    TrajectoryTooShort { length: f64, segment: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
