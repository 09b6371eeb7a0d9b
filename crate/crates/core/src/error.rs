use std::path::PathBuf;

/// Every failure the library can report.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("unsupported image format")]
    UnsupportedFormat,

    #[error("corrupt image file: {0}")]
    CorruptFile(String),

    #[error("image is {width}x{height}; both sides must be at least 8 pixels")]
    ImageTooSmall { width: u32, height: u32 },

    #[error("raster buffer holds {actual} samples, expected {expected}")]
    InvalidRaster { expected: usize, actual: usize },

    #[error("JPEG quality {0} is outside 1..=100")]
    InvalidQuality(i64),

    #[error("JPEG encoding failed: {0}")]
    EncodeFailure(#[from] jpeg_encoder::EncodingError),

    #[error("missing corpus directory {}", .0.display())]
    MissingDirectory(PathBuf),

    #[error("no decodable images under {}", .0.display())]
    EmptyCorpus(PathBuf),

    #[error("class {label} has {count} records; at least 3 are required")]
    TooFewExamples { label: u8, count: usize },

    #[error("rectangle ({x}, {y}, {w}, {h}) does not fit a {width}x{height} image or is smaller than 16x16")]
    RectOutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cache does not match the parameters: {0}")]
    StaleCache(String),

    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize },

    #[error("prediction set is empty")]
    EmptyPredictionSet,

    #[error("ROC needs at least one positive and one negative row")]
    SingleClassOnly,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {kind}: {message}")]
    Format { kind: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format {
            kind: "CSV",
            message: err.to_string(),
        }
    }
}
