//! Error type shared across the engine.

use thiserror::Error;

/// Errors produced by tensor ops, model assembly, training and IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: invalid shape {shape:?}: {reason}")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("backward on a tensor detached from the computation graph")]
    DetachedBackward,

    #[error("conv3d: input has {input} channels but layer expects {expected}")]
    ChannelMismatch { input: usize, expected: usize },

    #[error("maxpool3d: height {height} is below the pooling window")]
    PoolHeightTooSmall { height: usize },

    #[error("window length {got} does not match model window length {expected}")]
    WindowLength { got: usize, expected: usize },

    #[error("window length must be odd, got {0}")]
    EvenWindow(usize),

    #[error("operation not available in mode {0}")]
    ModeMismatch(String),

    #[error("parameter {0} has no gradient; run backward first")]
    MissingGrad(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),

    #[error("label {value} outside the valid row range [1, {height}]")]
    LabelOutOfRange { value: f64, height: usize },

    #[error("pixel normalizer used before fitting a training mean")]
    NormalizerNotFitted,

    #[error("surface generation failed: {0}")]
    Generation(String),

    #[error("predictions missing for slice {0}")]
    MissingSlice(usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
