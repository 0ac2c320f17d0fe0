use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // image decoding and geometry of rasters
    #[error("malformed image file: {0}")]
    MalformedFile(String),
    #[error("unsupported image variant: {0}")]
    UnsupportedVariant(String),
    #[error("zero dimension requested ({width}x{height})")]
    ZeroDimension { width: u32, height: u32 },

    // nn
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("negative variance in channel {channel}: {value}")]
    NegativeVariance { channel: usize, value: f32 },
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported file version {0}")]
    VersionUnsupported(u32),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{0}` contains a non-finite value")]
    NonFiniteWeight(String),

    // facedetect
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("size mismatch: expected {expected:?}, got {actual:?}")]
    SizeMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("svm has {actual} weights, descriptor length is {expected}")]
    UntrainedModel { expected: usize, actual: usize },
    #[error("training class `{0}` has no examples")]
    EmptyClass(&'static str),
    #[error("vector length {actual} differs from {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    // geometry
    #[error("point cloud is degenerate (all points coincide)")]
    DegenerateCloud,
    #[error("degenerate keypoint configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("homography is numerically singular")]
    NumericallySingular,
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("homography is singular and cannot be inverted")]
    SingularHomography,

    // emotion / pipeline
    #[error("degenerate face box ({w}x{h})")]
    DegenerateBox { w: f32, h: f32 },
    #[error("no frames to benchmark")]
    NoFrames,
    #[error("frame source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("invalid pipeline config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
