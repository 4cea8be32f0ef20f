use std::path::PathBuf;

/// Errors produced across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("batch normalization over an empty channel (shape {0:?})")]
    EmptyBatch(Vec<usize>),

    #[error("sequence length must be at least 1")]
    EmptySequence,

    #[error("input width {width} is below the encoder minimum of {min}")]
    WidthTooSmall { width: usize, min: usize },

    #[error("target of length {target_len} needs at least {required} frames, got {frames}")]
    InfeasibleTarget {
        frames: usize,
        target_len: usize,
        required: usize,
    },

    #[error("label {label} is out of range for an alphabet of {classes} classes (blank {blank})")]
    InvalidLabel {
        label: usize,
        classes: usize,
        blank: usize,
    },

    #[error("brute-force search space {size} exceeds the limit {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss {loss} on batch [{ids}]")]
    NonFiniteLoss { loss: f64, ids: String },

    #[error("unknown augmentation kind `{0}`")]
    UnknownAugmentation(String),

    #[error("unknown encoding `{0}` (expected `semantic` or `agnostic`)")]
    UnknownEncoding(String),

    #[error("{0}")]
    Metric(String),

    #[error("corpus root {0} does not exist")]
    MissingRoot(PathBuf),

    #[error("no usable samples under {0}")]
    EmptyCorpus(PathBuf),

    #[error("image is too narrow after resize: width {width} < {min}")]
    ImageTooNarrow { width: usize, min: usize },

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint does not match the model: {0}")]
    CheckpointMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("I/O error at {path}: {source}")]
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

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
