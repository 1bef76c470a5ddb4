//! Model assembly: the multi-task convolutional trunk, the per-boundary
//! recurrent model iterated across image columns, their combination, and
//! surface reconstruction.

mod c3d;
mod combined;
mod rnn;
mod surface;

pub use c3d::{C3dModel, C3dOutput};
pub use combined::{CombinedModel, WindowOutput};
pub use rnn::{RnnModel, RnnOutput};
pub use surface::{reconstruct_surfaces, SurfaceGrid};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{DEFAULT_HIDDEN, DEFAULT_KERNEL};
use crate::tensor::Tensor;

/// Which parts of the combined model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Recurrent model only, zero-initialized hidden states.
    #[serde(rename = "rnn")]
    Rnn,
    /// Convolutional trunk with single-slice (depth-1) kernels.
    #[serde(rename = "c2d")]
    C2d,
    /// Convolutional trunk with 3-D kernels.
    #[serde(rename = "c3d")]
    C3d,
    /// 2-D trunk providing the recurrent model's initial hidden states.
    #[serde(rename = "c2d+rnn")]
    C2dRnn,
    /// Full model: 3-D trunk plus recurrent refinement.
    #[serde(rename = "c3d+rnn")]
    C3dRnn,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Rnn, Mode::C2d, Mode::C3d, Mode::C2dRnn, Mode::C3dRnn];

    pub fn has_conv(self) -> bool {
        !matches!(self, Mode::Rnn)
    }

    pub fn has_rnn(self) -> bool {
        matches!(self, Mode::Rnn | Mode::C2dRnn | Mode::C3dRnn)
    }

    pub fn is_2d(self) -> bool {
        matches!(self, Mode::C2d | Mode::C2dRnn)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Rnn => "rnn",
            Mode::C2d => "c2d",
            Mode::C3d => "c3d",
            Mode::C2dRnn => "c2d+rnn",
            Mode::C3dRnn => "c3d+rnn",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(Mode::Rnn),
            "c2d" => Ok(Mode::C2d),
            "c3d" => Ok(Mode::C3d),
            "c2d+rnn" => Ok(Mode::C2dRnn),
            "c3d+rnn" => Ok(Mode::C3dRnn),
            other => Err(Error::ModeMismatch(other.to_string())),
        }
    }
}

/// Full architecture description; serialized into checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    /// Number of boundaries predicted per column (`K`).
    pub boundary_count: usize,
    /// Slices per input window (`L`, odd). Forced to 1 by [`ModelConfig::to_2d`].
    pub window_len: usize,
    pub height: usize,
    pub width: usize,
    pub shared_channels: [usize; 2],
    pub branch_channels: [usize; 6],
    /// GRU hidden width; also the width of the trunk's feature vector that
    /// initializes the recurrent hidden state.
    pub hidden: usize,
    pub kernel: [usize; 3],
    /// Whether sequence inference adds each cell's final hidden state from
    /// the previous slice into the next slice's initial state.
    pub carry_across_slices: bool,
}

impl ModelConfig {
    /// Configuration matching the reference geometry: two boundaries,
    /// 5-slice windows of 64x64 images.
    pub fn new(mode: Mode) -> Self {
        let cfg = ModelConfig {
            mode,
            boundary_count: 2,
            window_len: 5,
            height: 64,
            width: 64,
            shared_channels: [16, 32],
            branch_channels: [32, 32, 64, 64, 64, 64],
            hidden: DEFAULT_HIDDEN,
            kernel: DEFAULT_KERNEL,
            carry_across_slices: false,
        };
        if mode.is_2d() {
            cfg.to_2d()
        } else {
            cfg
        }
    }

    /// Small variant for quick experiments on a single core.
    pub fn desk(mode: Mode) -> Self {
        let cfg = ModelConfig {
            shared_channels: [3, 6],
            branch_channels: [6, 6, 6, 6, 6, 6],
            hidden: 96,
            ..ModelConfig::new(mode)
        };
        if mode.is_2d() {
            cfg.to_2d()
        } else {
            cfg
        }
    }

    /// The 2-D ablation: identical topology with depth-1 kernels operating
    /// on single slices.
    pub fn to_2d(&self) -> Self {
        ModelConfig {
            window_len: 1,
            kernel: [1, self.kernel[1], self.kernel[2]],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len.is_multiple_of(2) {
            return Err(Error::EvenWindow(self.window_len));
        }
        if self.boundary_count == 0 || self.height == 0 || self.width == 0 || self.hidden == 0 {
            return Err(Error::InvalidShape {
                op: "model config",
                shape: vec![self.boundary_count, self.height, self.width, self.hidden],
                reason: "extents must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Ordered list of `(name, tensor)` pairs; the canonical parameter order
/// used by optimizers, checkpoints and flattened snapshots.
pub type NamedParams = Vec<(String, Tensor)>;
