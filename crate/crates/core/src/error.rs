//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input image {got}x{got2} is smaller than the required {need} pixels per side")]
    InputTooSmall { got: usize, got2: usize, need: usize },

    #[error("expected {expected} channel(s), got {got}")]
    BadChannelCount { expected: usize, got: usize },

    #[error("invalid range for {field}: lo {lo} > hi {hi}")]
    BadRange { field: &'static str, lo: f64, hi: f64 },

    #[error("warp matrix is singular or near-singular (|det| = {det:e})")]
    SingularWarp { det: f64 },

    #[error("warp has no parametric form and cannot be serialized")]
    WarpNotParametric,

    #[error("manifest validation failed for record(s): {ids:?}")]
    ManifestValidation { ids: Vec<String> },

    #[error("manifest is empty")]
    EmptyDataset,

    #[error("operation requires conv_ae mode, codec is in {mode} mode")]
    Mode { mode: &'static str },

    #[error("bad tensor shape: {0}")]
    BadShape(String),

    #[error("token count mismatch: sequence holds {got} tokens, layout wants {want}")]
    CountMismatch { got: usize, want: usize },

    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: Vec<usize>, b: Vec<usize> },

    #[error("pixel values outside [0,1]: min {min}, max {max}")]
    Range { min: f64, max: f64 },

    #[error("image side {got} is below the minimum {need} for this operation")]
    TooSmall { got: usize, need: usize },

    #[error("selector '{selector}' matched no adaptable transform")]
    NoMatch { selector: String },

    #[error("no adapters attached")]
    AdaptersAbsent,

    #[error("training diverged: loss became non-finite at step {step}")]
    Diverged { step: usize },

    #[error("checkpoint/config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn image(path: impl Into<String>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }
}
