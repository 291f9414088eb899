use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of failures, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input values or malformed files.
    Validation,
    /// Inputs are individually valid but disagree with each other.
    Inconsistency,
    /// Filesystem or encoding failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("extent has zero or negative area")]
    DegenerateExtent,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid class catalog: {0}")]
    InvalidCatalog(String),

    #[error("input file is empty")]
    EmptyFile,
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: probability for class `{class}` outside [0, 1]")]
    ProbabilityOutOfRange { line: usize, class: String },
    #[error("missing class column `{0}`")]
    MissingClassColumn(String),
    #[error("line {line}: sequence number in session `{session}` is not strictly increasing")]
    NonIncreasingSeq { session: String, line: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    OutOfRangeCoordinate { lat: f64, lon: f64 },
    #[error("unknown class index {0}")]
    UnknownClass(usize),

    #[error("all points are collinear")]
    AllCollinear,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("rasters are not on the same grid")]
    GridMismatch,
    #[error("empty input list")]
    EmptyList,
    #[error("class mismatch: expected {expected}, got {got}")]
    ClassMismatch { expected: usize, got: usize },
    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("no values to compute percentiles from")]
    EmptyValues,
    #[error("bad percentile pair ({low}, {high}); need 0 <= low < high <= 1")]
    BadPercentilePair { low: f64, high: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("no raster supplied for class {0}")]
    MissingClassRaster(usize),
    #[error("source and destination grids do not overlap")]
    NoOverlap,

    #[error("tile size {0} is below the minimum of 32")]
    TileTooSmall(usize),
    #[error("raster has no labeled pixels")]
    NoLabeledPixels,
    #[error("invalid class weights: {0}")]
    InvalidWeights(String),
    #[error("no predicted mask for tile `{0}`")]
    MissingMask(String),
    #[error("predicted mask for unknown tile `{0}`")]
    ExtraMask(String),
    #[error("size mismatch for `{id}`: expected {expected}x{expected}, got {width}x{height}")]
    SizeMismatch { id: String, expected: usize, width: usize, height: usize },
    #[error("label {label} is not in the class catalog")]
    LabelOutOfCatalog { label: u8 },
    #[error("noise rate must be in [0, 1], got {0}")]
    BadNoiseRate(f64),
    #[error("content hash mismatch for `{path}`")]
    HashMismatch { path: String },
    #[error("manifest chain broken: {0}")]
    ChainBroken(String),

    #[error("no evaluated pixels")]
    NoEvaluatedPixels,
    #[error("no class is present")]
    NoPresentClasses,

    #[error("instance has no pixels")]
    EmptyInstance,
    #[error("area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("point prediction set is empty")]
    EmptySet,

    #[error("bad parameters: {0}")]
    BadParameters(String),

    #[error("invalid file format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            GridMismatch
            | ClassMismatch { .. }
            | LengthMismatch { .. }
            | MissingClassRaster(_)
            | NoOverlap
            | MissingMask(_)
            | ExtraMask(_)
            | SizeMismatch { .. }
            | HashMismatch { .. }
            | ChainBroken(_) => ErrorKind::Inconsistency,
            Io { .. } | Image(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}
