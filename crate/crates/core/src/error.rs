use std::path::PathBuf;
use thiserror::Error;

/// Unified error type for the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("index out of range in {context}: {index:?} not within {bounds:?}")]
    IndexOutOfRange {
        context: String,
        index: Vec<usize>,
        bounds: Vec<usize>,
    },

    #[error("incomplete light field: ({m}, {n})")]
    IncompleteLightField { m: usize, n: usize },

    #[error("view dimensions disagree in {file}: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    ViewDimensionMismatch {
        file: PathBuf,
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("disparity too large: |d|·max(M,N) = {lhs} must stay below min(H,W)/4 = {rhs}")]
    DisparityTooLarge { lhs: f64, rhs: f64 },

    #[error("dimensions {h}x{w} not divisible by downsampling factor {alpha}")]
    NotDivisible { h: usize, w: usize, alpha: usize },

    #[error("invalid upscale factor {alpha}: must be 2 or 4")]
    BadAlpha { alpha: usize },

    #[error("image {h}x{w} smaller than the {win}x{win} comparison window")]
    ImageTooSmall { h: usize, w: usize, win: usize },

    #[error("expected {expected} auxiliary features, got {got}")]
    BadStackLength { expected: usize, got: usize },

    #[error("non-finite loss at iteration {iteration}: {value}")]
    NonFiniteLoss { iteration: usize, value: f64 },

    #[error("scene too small: spatial {h}x{w} below patch size {patch}")]
    SceneTooSmall { h: usize, w: usize, patch: usize },

    #[error("container truncated: need {needed} bytes, file has {actual}")]
    ContainerTruncated { needed: u64, actual: u64 },

    #[error("unsupported container version {got} (supported: {supported})")]
    BadVersion { got: u32, supported: u32 },

    #[error("tensor {name}: header shape {header:?} disagrees with payload/model shape {model:?}")]
    TensorShapeDisagreement {
        name: String,
        header: Vec<usize>,
        model: Vec<usize>,
    },

    #[error("config mismatch in field {field}: model has {model}, input requires {input}")]
    ConfigMismatch {
        field: String,
        model: String,
        input: String,
    },

    #[error("invalid config entry {key:?}: {reason}")]
    BadConfig { key: String, reason: String },

    #[error("unpaired scene: {name}")]
    UnpairedScene { name: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Image {
        context: String,
        #[source]
        source: image::ImageError,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a path/context string to an I/O error.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn image(context: impl Into<String>, source: image::ImageError) -> Self {
        Error::Image {
            context: context.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
