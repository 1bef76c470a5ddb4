//! Multi-task recurrent model.
//!
//! One GRU cell per boundary, iterated once per image column. Within an
//! iteration the cells run in boundary order, so cell `k` can fuse the
//! hidden state just produced by cell `k - 1` (zero vector for the first
//! cell) with the projected image column. Each cell also receives its own
//! hidden state from the previous column, and a per-cell linear head turns
//! the new hidden state into the column's row estimate.

use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, NamedParams};
use crate::error::{Error, Result};
use crate::layers::{fuse, FcLayer, GruCell};
use crate::tensor::{concat, Tensor};

pub struct RnnModel {
    cfg: ModelConfig,
    column_proj: FcLayer,
    cells: Vec<GruCell>,
}

/// Result of one slice pass.
pub struct RnnOutput {
    /// `[K, W]` row estimates, normalized.
    pub predictions: Tensor,
    /// Final hidden state of each cell after the last column.
    pub final_hidden: Vec<Tensor>,
}

impl RnnModel {
    pub fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let column_proj = FcLayer::new(cfg.height, cfg.hidden, rng);
        let cells = (0..cfg.boundary_count)
            .map(|_| GruCell::new(cfg.hidden, 1, rng))
            .collect();
        Ok(RnnModel {
            cfg: cfg.clone(),
            column_proj,
            cells,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Run every cell across the columns of one `[H, W]` slice.
    ///
    /// `init_hidden` supplies one starting hidden state per cell (zeros when
    /// no trunk features are available).
    pub fn forward(&self, slice: &Tensor, init_hidden: &[Tensor]) -> Result<RnnOutput> {
        let s = slice.shape();
        if s != [self.cfg.height, self.cfg.width] {
            return Err(Error::ShapeMismatch {
                op: "rnn forward",
                lhs: s.to_vec(),
                rhs: vec![self.cfg.height, self.cfg.width],
            });
        }
        if init_hidden.len() != self.cells.len() {
            return Err(Error::ShapeMismatch {
                op: "rnn init hidden",
                lhs: vec![init_hidden.len()],
                rhs: vec![self.cells.len()],
            });
        }
        for h in init_hidden {
            if h.shape() != [self.cfg.hidden] {
                return Err(Error::ShapeMismatch {
                    op: "rnn init hidden",
                    lhs: h.shape().to_vec(),
                    rhs: vec![self.cfg.hidden],
                });
            }
        }
        let k = self.cells.len();
        let w_total = self.cfg.width;
        let mut hidden: Vec<Tensor> = init_hidden.to_vec();
        let mut outputs: Vec<Vec<Tensor>> = vec![Vec::with_capacity(w_total); k];
        let zero = Tensor::zeros(&[self.cfg.hidden]);
        for w in 0..w_total {
            let column = slice.column(w)?;
            let projected = self.column_proj.forward(&column)?;
            let mut cross = zero.clone();
            for (ki, cell) in self.cells.iter().enumerate() {
                let fused = fuse(&projected, &cross)?;
                let (h_new, s_out) = cell.step(&fused, &hidden[ki])?;
                cross = h_new.clone();
                hidden[ki] = h_new;
                outputs[ki].push(s_out);
            }
        }
        let mut rows = Vec::with_capacity(k);
        for cell_outputs in outputs {
            let row = concat(&cell_outputs, 0)?;
            rows.push(row.reshape(&[1, w_total])?);
        }
        Ok(RnnOutput {
            predictions: concat(&rows, 0)?,
            final_hidden: hidden,
        })
    }

    /// Zero starting states, one per cell.
    pub fn zero_hidden(&self) -> Vec<Tensor> {
        (0..self.cells.len())
            .map(|_| Tensor::zeros(&[self.cfg.hidden]))
            .collect()
    }

    pub fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor)) {
        f(format!("{prefix}.proj.weight"), &self.column_proj.weight);
        f(format!("{prefix}.proj.bias"), &self.column_proj.bias);
        for (k, cell) in self.cells.iter().enumerate() {
            let named: [(&str, &Tensor); 11] = [
                ("u_iz", &cell.u_iz),
                ("u_hz", &cell.u_hz),
                ("u_ir", &cell.u_ir),
                ("u_hr", &cell.u_hr),
                ("u_in", &cell.u_in),
                ("u_hn", &cell.u_hn),
                ("b_z", &cell.b_z),
                ("b_r", &cell.b_r),
                ("b_n", &cell.b_n),
                ("u_y", &cell.u_y),
                ("b_y", &cell.b_y),
            ];
            for (field, tensor) in named {
                f(format!("{prefix}.cell.{k}.{field}"), tensor);
            }
        }
    }

    pub fn named_params(&self) -> NamedParams {
        let mut out = Vec::new();
        self.visit_params("rnn", &mut |name, t| out.push((name, t.clone())));
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Set every parameter to zero (reference behavior in tests).
    pub fn zero_params(&self) {
        self.visit_params("rnn", &mut |_, t| {
            t.set_data(&vec![0.0; t.numel()]).expect("same shape");
        });
    }
}
