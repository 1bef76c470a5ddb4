//! Combination of the convolutional trunk and the recurrent model.
//!
//! In the combined modes the trunk's per-branch feature vector initializes
//! the matching cell's hidden state for the window's center slice. Across a
//! sequence, each cell's final hidden state from the previous slice is added
//! into the next slice's initial state, carrying longer-range context.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{C3dModel, Mode, ModelConfig, NamedParams, RnnModel};
use crate::data::{window, NormalizedSequence};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub struct CombinedModel {
    cfg: ModelConfig,
    c3d: Option<C3dModel>,
    rnn: Option<RnnModel>,
}

/// Result of one window pass through the combined model.
pub struct WindowOutput {
    /// `[K, W]` normalized row estimates for the center slice.
    pub predictions: Tensor,
    /// Final per-cell hidden states, present in modes with a recurrent part.
    pub hidden: Option<Vec<Tensor>>,
}

impl CombinedModel {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c3d = if cfg.mode.has_conv() {
            Some(C3dModel::new(cfg, &mut rng)?)
        } else {
            None
        };
        let rnn = if cfg.mode.has_rnn() {
            Some(RnnModel::new(cfg, &mut rng)?)
        } else {
            None
        };
        Ok(CombinedModel {
            cfg: cfg.clone(),
            c3d,
            rnn,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn c3d(&self) -> Option<&C3dModel> {
        self.c3d.as_ref()
    }

    pub fn rnn(&self) -> Option<&RnnModel> {
        self.rnn.as_ref()
    }

    /// Center slice of a `[1, L, H, W]` window as an `[H, W]` tensor.
    fn center_slice(&self, window: &Tensor) -> Result<Tensor> {
        let s = window.shape();
        if s.len() != 4 || s[0] != 1 || s[1].is_multiple_of(2) {
            return Err(Error::InvalidShape {
                op: "center slice",
                shape: s.to_vec(),
                reason: "expected [1, L, H, W] with odd L".into(),
            });
        }
        if s[1] != self.cfg.window_len {
            return Err(Error::WindowLength {
                got: s[1],
                expected: self.cfg.window_len,
            });
        }
        window
            .slice(1, (s[1] - 1) / 2, 1)?
            .reshape(&[s[2], s[3]])
    }

    /// One window forward pass. `carry` is the previous slice's final hidden
    /// state per cell; it is added to this slice's initial hidden state.
    pub fn forward_window(&self, window: &Tensor, carry: Option<&[Tensor]>) -> Result<WindowOutput> {
        match self.cfg.mode {
            Mode::C2d | Mode::C3d => {
                let c3d = self.c3d.as_ref().expect("conv modes hold a trunk");
                let out = c3d.forward(window)?;
                Ok(WindowOutput {
                    predictions: out.predictions,
                    hidden: None,
                })
            }
            Mode::Rnn => {
                let rnn = self.rnn.as_ref().expect("rnn modes hold a recurrent model");
                let slice = self.center_slice(window)?;
                let init = match carry {
                    Some(prev) => prev.to_vec(),
                    None => rnn.zero_hidden(),
                };
                let out = rnn.forward(&slice, &init)?;
                Ok(WindowOutput {
                    predictions: out.predictions,
                    hidden: Some(out.final_hidden),
                })
            }
            Mode::C2dRnn | Mode::C3dRnn => {
                let c3d = self.c3d.as_ref().expect("combined modes hold a trunk");
                let rnn = self.rnn.as_ref().expect("combined modes hold a recurrent model");
                let features = c3d.forward(window)?.features;
                let init = match carry {
                    Some(prev) => features
                        .iter()
                        .zip(prev.iter())
                        .map(|(f, h)| f.add(h))
                        .collect::<Result<Vec<_>>>()?,
                    None => features,
                };
                let slice = self.center_slice(window)?;
                let out = rnn.forward(&slice, &init)?;
                Ok(WindowOutput {
                    predictions: out.predictions,
                    hidden: Some(out.final_hidden),
                })
            }
        }
    }

    /// Inference over a whole normalized sequence: one `[K, W]` prediction
    /// block per slice. No gradients are retained.
    pub fn predict_sequence(&self, seq: &NormalizedSequence) -> Result<Vec<Vec<Scalar>>> {
        self.predict_sequence_with(seq, self.cfg.carry_across_slices)
    }

    /// As [`CombinedModel::predict_sequence`], with the cross-slice hidden
    /// handoff explicitly enabled or disabled.
    pub fn predict_sequence_with(
        &self,
        seq: &NormalizedSequence,
        carry_across_slices: bool,
    ) -> Result<Vec<Vec<Scalar>>> {
        let samples = window(seq, self.cfg.window_len)?;
        let mut out = Vec::with_capacity(samples.len());
        let mut carry: Option<Vec<Tensor>> = None;
        for sample in &samples {
            let input = Tensor::from_vec(
                sample.window.clone(),
                &[1, self.cfg.window_len, self.cfg.height, self.cfg.width],
            )?;
            let result = self.forward_window(&input, carry.as_deref())?;
            out.push(result.predictions.to_vec());
            if carry_across_slices {
                // Detach so the graph of each slice is dropped immediately.
                carry = result
                    .hidden
                    .map(|hs| hs.iter().map(|h| h.detach()).collect());
            }
        }
        Ok(out)
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(String, &Tensor)) {
        if let Some(c3d) = &self.c3d {
            c3d.visit_params("c3d", f);
        }
        if let Some(rnn) = &self.rnn {
            rnn.visit_params("rnn", f);
        }
    }

    /// Every parameter in canonical order.
    pub fn named_params(&self) -> NamedParams {
        let mut out = Vec::new();
        self.visit_params(&mut |name, t| out.push((name, t.clone())));
        out
    }

    /// Trunk parameters only (first training phase).
    pub fn conv_params(&self) -> NamedParams {
        self.c3d.as_ref().map(|m| m.named_params()).unwrap_or_default()
    }

    /// Recurrent parameters only (second training phase).
    pub fn rnn_params(&self) -> NamedParams {
        self.rnn.as_ref().map(|m| m.named_params()).unwrap_or_default()
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Flat snapshot of all parameters in canonical order.
    pub fn flat_params(&self) -> Vec<Scalar> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, t| out.extend(t.data().iter().copied()));
        out
    }

    /// Restore a snapshot produced by [`CombinedModel::flat_params`].
    pub fn load_flat(&self, flat: &[Scalar]) -> Result<()> {
        let mut offset = 0;
        let mut status = Ok(());
        self.visit_params(&mut |name, t| {
            if status.is_err() {
                return;
            }
            let n = t.numel();
            if offset + n > flat.len() {
                status = Err(Error::Checkpoint(format!(
                    "flat parameter vector too short at {name}"
                )));
                return;
            }
            t.set_data(&flat[offset..offset + n]).expect("same shape");
            offset += n;
        });
        status?;
        if offset != flat.len() {
            return Err(Error::Checkpoint(format!(
                "flat parameter vector has {} extra values",
                flat.len() - offset
            )));
        }
        Ok(())
    }
}
