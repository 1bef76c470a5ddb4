//! Multi-task convolutional trunk.
//!
//! Two shared convolutional layers (each followed by ReLU and height
//! pooling) feed `K` per-boundary branches of six convolutional layers.
//! Height is halved after each shared layer and after branch layers 2, 4
//! and 6, as long as at least two rows remain. Each branch ends in two
//! fully-connected layers: the first produces the feature vector that can
//! initialize a recurrent hidden state, the second emits one row estimate
//! per image column in normalized label units.

use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, NamedParams};
use crate::error::{Error, Result};
use crate::layers::{Conv3dLayer, FcLayer, MaxPool3dLayer};
use crate::tensor::{concat, Tensor};

struct Branch {
    convs: Vec<Conv3dLayer>,
    fc_feature: FcLayer,
    fc_out: FcLayer,
}

pub struct C3dModel {
    cfg: ModelConfig,
    shared: Vec<Conv3dLayer>,
    branches: Vec<Branch>,
    pool: MaxPool3dLayer,
    shared_pool: [bool; 2],
    branch_pool: [bool; 6],
    final_height: usize,
}

/// Result of one window pass.
pub struct C3dOutput {
    /// `[K, W]` row estimates for the center slice, normalized.
    pub predictions: Tensor,
    /// Per-branch feature vectors of length `hidden`.
    pub features: Vec<Tensor>,
}

impl C3dModel {
    pub fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let mut shared = Vec::with_capacity(2);
        let mut height = cfg.height;
        let mut shared_pool = [false; 2];
        let mut in_ch = 1;
        for (i, &out_ch) in cfg.shared_channels.iter().enumerate() {
            shared.push(Conv3dLayer::new(in_ch, out_ch, cfg.kernel, rng));
            if height >= 2 {
                shared_pool[i] = true;
                height /= 2;
            }
            in_ch = out_ch;
        }
        // One pooling plan shared by every branch: after layers 2, 4 and 6.
        let mut branch_pool = [false; 6];
        for (j, slot) in branch_pool.iter_mut().enumerate() {
            if j % 2 == 1 && height >= 2 {
                *slot = true;
                height /= 2;
            }
        }
        let flat =
            cfg.branch_channels[5] * cfg.window_len * height.max(1) * cfg.width;
        let mut branches = Vec::with_capacity(cfg.boundary_count);
        for _ in 0..cfg.boundary_count {
            let mut convs = Vec::with_capacity(6);
            let mut ch = cfg.shared_channels[1];
            for &out_ch in &cfg.branch_channels {
                convs.push(Conv3dLayer::new(ch, out_ch, cfg.kernel, rng));
                ch = out_ch;
            }
            branches.push(Branch {
                convs,
                fc_feature: FcLayer::new(flat, cfg.hidden, rng),
                fc_out: FcLayer::new(cfg.hidden, cfg.width, rng),
            });
        }
        Ok(C3dModel {
            cfg: cfg.clone(),
            shared,
            branches,
            pool: MaxPool3dLayer,
            shared_pool,
            branch_pool,
            final_height: height.max(1),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Height remaining after all pooling stages.
    pub fn final_height(&self) -> usize {
        self.final_height
    }

    fn check_window(&self, window: &Tensor) -> Result<()> {
        let s = window.shape();
        if s.len() != 4 || s[0] != 1 {
            return Err(Error::InvalidShape {
                op: "c3d forward",
                shape: s.to_vec(),
                reason: "expected [1, L, H, W]".into(),
            });
        }
        if s[1] != self.cfg.window_len {
            return Err(Error::WindowLength {
                got: s[1],
                expected: self.cfg.window_len,
            });
        }
        if s[2] != self.cfg.height || s[3] != self.cfg.width {
            return Err(Error::ShapeMismatch {
                op: "c3d forward",
                lhs: s.to_vec(),
                rhs: vec![1, self.cfg.window_len, self.cfg.height, self.cfg.width],
            });
        }
        Ok(())
    }

    /// Forward pass over one `[1, L, H, W]` window; the predictions target
    /// the window's center slice.
    pub fn forward(&self, window: &Tensor) -> Result<C3dOutput> {
        self.check_window(window)?;
        let mut x = window.clone();
        for (layer, &pool) in self.shared.iter().zip(self.shared_pool.iter()) {
            x = layer.forward(&x)?.relu()?;
            if pool {
                x = self.pool.forward(&x)?;
            }
        }
        let mut rows = Vec::with_capacity(self.branches.len());
        let mut features = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            let mut y = x.clone();
            for (conv, &pool) in branch.convs.iter().zip(self.branch_pool.iter()) {
                y = conv.forward(&y)?.relu()?;
                if pool {
                    y = self.pool.forward(&y)?;
                }
            }
            let flat = y.reshape(&[y.numel()])?;
            let feature = branch.fc_feature.forward(&flat)?.relu()?;
            let out = branch.fc_out.forward(&feature)?;
            rows.push(out.reshape(&[1, self.cfg.width])?);
            features.push(feature);
        }
        Ok(C3dOutput {
            predictions: concat(&rows, 0)?,
            features,
        })
    }

    pub fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor)) {
        for (i, layer) in self.shared.iter().enumerate() {
            f(format!("{prefix}.shared.{i}.weight"), &layer.weight);
            f(format!("{prefix}.shared.{i}.bias"), &layer.bias);
        }
        for (k, branch) in self.branches.iter().enumerate() {
            for (j, conv) in branch.convs.iter().enumerate() {
                f(format!("{prefix}.branch.{k}.conv.{j}.weight"), &conv.weight);
                f(format!("{prefix}.branch.{k}.conv.{j}.bias"), &conv.bias);
            }
            f(
                format!("{prefix}.branch.{k}.fc_feature.weight"),
                &branch.fc_feature.weight,
            );
            f(
                format!("{prefix}.branch.{k}.fc_feature.bias"),
                &branch.fc_feature.bias,
            );
            f(
                format!("{prefix}.branch.{k}.fc_out.weight"),
                &branch.fc_out.weight,
            );
            f(
                format!("{prefix}.branch.{k}.fc_out.bias"),
                &branch.fc_out.bias,
            );
        }
    }

    pub fn named_params(&self) -> NamedParams {
        let mut out = Vec::new();
        self.visit_params("c3d", &mut |name, t| out.push((name, t.clone())));
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }
}
