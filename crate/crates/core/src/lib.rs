//! Engine for learning layer-boundary positions in sequences of tomographic
//! slices and reconstructing them into 3-D surfaces.
//!
//! The crate is self-contained: a reverse-mode tensor tape, the neural
//! building blocks (3-D convolution, height pooling, fully-connected layers,
//! a GRU cell iterated across image columns), the multi-task models built
//! from them, a two-phase Adam training loop, a synthetic echogram-style
//! dataset generator with the normalization pipeline, checkpointing, and the
//! column-wise evaluation metric.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod models;
pub mod tensor;
pub mod training;

pub use data::{GenParams, TomoSequence};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use models::{CombinedModel, Mode, ModelConfig, SurfaceGrid};
pub use tensor::{Scalar, Tensor};
