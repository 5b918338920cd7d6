use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("data length {len} does not match {width}x{height}")]
    DataLength { len: usize, width: usize, height: usize },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("decode error in {field}: {message}")]
    Decode { field: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("coordinate ({row}, {col}) is outside a {width}x{height} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid path: {0}")]
    InvalidPath(&'static str),

    #[error("pixel ({row}, {col}) is not admissible")]
    NotAdmissible { row: usize, col: usize },

    #[error("no admissible path between {from:?} and {to:?}")]
    Unreachable {
        from: (usize, usize),
        to: (usize, usize),
    },

    #[error("exact mode refused: {count} admissible pixels exceeds the cap of {cap}")]
    SizeCap { count: usize, cap: usize },

    #[error("no component holds two or more admissible pixels")]
    NoValidPair,

    #[error("rejection sampler gave up after {0} draws")]
    RejectionCap(usize),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
