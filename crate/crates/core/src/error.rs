use std::path::PathBuf;

/// Errors raised by the transforms, the classifier and the data readers.
///
/// Every variant maps to a stable numeric code (see [`Error::code`]) which the
/// CLI uses as its process exit status and the C API returns as a status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("image has no strictly positive pixel")]
    AllZeroImage,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("cumulative distribution is not strictly increasing at sample {index}")]
    NonMonotoneCdf { index: usize },

    #[error("transport map is not strictly increasing at sample {index}")]
    NonMonotoneInput { index: usize },

    #[error("projection grid half-width {half_width:.4} does not cover image half-diagonal {required:.4}")]
    GridTooSmall { half_width: f64, required: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("class {class_id} spans no direction (all columns numerically zero)")]
    DegenerateClass { class_id: usize },

    #[error("class {class_id} has no training samples")]
    MissingClass { class_id: usize },

    #[error("unsupported format version {found} (this build reads {supported})")]
    FormatVersionMismatch { found: String, supported: String },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("bad magic number {found:#010x} in {path}")]
    BadMagic { path: PathBuf, found: u32 },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("truncated or unreadable file {path}: {reason}")]
    TruncatedFile { path: PathBuf, reason: String },

    #[error("{lost_fraction:.4} of the image mass falls outside the canvas")]
    SupportClipped { lost_fraction: f64 },

    #[error("class {class_id} has {available} samples, {requested} requested")]
    InsufficientSamples { class_id: usize, available: usize, requested: usize },

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("in- and out-of-distribution confound ranges overlap")]
    OverlappingSpecs,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable numeric code for this error class. Zero is reserved for success
    /// and 1/2 for generic and usage failures of the CLI.
    pub fn code(&self) -> i32 {
        match self {
            Error::AllZeroImage => 10,
            Error::InvalidGrid(_) => 11,
            Error::InvalidDensity(_) => 12,
            Error::NonMonotoneCdf { .. } => 13,
            Error::NonMonotoneInput { .. } => 14,
            Error::GridTooSmall { .. } => 15,
            Error::DimensionMismatch { .. } => 16,
            Error::DegenerateClass { .. } => 17,
            Error::MissingClass { .. } => 18,
            Error::FormatVersionMismatch { .. } => 19,
            Error::CorruptFile(_) => 20,
            Error::BadMagic { .. } => 21,
            Error::CountMismatch { .. } => 22,
            Error::TruncatedFile { .. } => 23,
            Error::SupportClipped { .. } => 24,
            Error::InsufficientSamples { .. } => 25,
            Error::EmptyTestSet => 26,
            Error::OverlappingSpecs => 27,
            Error::InvalidConfig(_) => 28,
            Error::Io(_) => 29,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
