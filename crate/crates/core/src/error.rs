use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("unsupported image format: magic {0:?} (expected P5 or P6)")]
    UnsupportedFormat(String),
    #[error("unsupported max value {0} (only 255 is accepted)")]
    UnsupportedMaxValue(u32),
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("truncated image payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coordinates ({x}, {y}) are outside the {width}x{height} frame")]
    OutOfBounds { x: i64, y: i64, width: usize, height: usize },
    #[error("stencil has no interior pixels")]
    EmptyStencil,
    #[error("feature mask at ({x}, {y}) exits the image frame")]
    MaskOutsideFrame { x: i64, y: i64 },
    #[error("histogram has zero total weight")]
    EmptyHistogram,
    #[error("histogram shape mismatch: {0}")]
    HistogramShape(String),
    #[error("histogram is not normalized")]
    NotNormalized,
    #[error("model bin {0} is zero; the model floor must be positive")]
    ZeroModelBin(usize),
    #[error("no training samples")]
    NoSamples,
    #[error("likelihood map has no valid entries")]
    NoValidEntries,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance is not positive-definite")]
    NotPositiveDefinite,
    #[error("coincident constellation: all mutual distances are zero")]
    CoincidentConstellation,
    #[error("feature {0:?} has no candidate peaks")]
    NoCandidates(String),
    #[error("every candidate constellation was rejected")]
    AllConstellationsRejected,
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("degenerate pose input: {0}")]
    PoseDegenerate(String),
    #[error("no positive-depth pose solution within tolerance")]
    NoPositiveDepth,
    #[error("no pose solutions to select from")]
    NoSolutions,
    #[error("silhouette mask has no interior pixels")]
    EmptySilhouette,
    #[error("no edge points inside the search region")]
    NoEdgePoints,
    #[error("feature {0:?} produced no valid peak")]
    NoValidPeak(String),
    #[error("template {0} exits the silhouette")]
    TemplateOutsideSilhouette(usize),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("json error in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}
