//! Evaluation: mean absolute column-wise error and the report format.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{PixelNormalizer, TomoSequence};
use crate::error::{Error, Result};
use crate::models::{reconstruct_surfaces, CombinedModel, SurfaceGrid};
use crate::tensor::Scalar;

/// Per-layer mean over all `(d, w)` of `|pred - truth|`, in pixels.
pub fn mean_column_error(pred: &SurfaceGrid, truth: &SurfaceGrid) -> Result<Vec<Scalar>> {
    if pred.layers != truth.layers || pred.depth != truth.depth || pred.width != truth.width {
        return Err(Error::ShapeMismatch {
            op: "mean_column_error",
            lhs: vec![pred.layers, pred.depth, pred.width],
            rhs: vec![truth.layers, truth.depth, truth.width],
        });
    }
    let cells = (pred.depth * pred.width) as Scalar;
    let mut out = Vec::with_capacity(pred.layers);
    for k in 0..pred.layers {
        let mut total = 0.0;
        for d in 0..pred.depth {
            for w in 0..pred.width {
                total += (pred.get(k, d, w) - truth.get(k, d, w)).abs();
            }
        }
        out.push(total / cells);
    }
    Ok(out)
}

/// Arithmetic mean of the per-layer errors.
pub fn averaged_error(per_layer: &[Scalar]) -> Scalar {
    per_layer.iter().sum::<Scalar>() / per_layer.len() as Scalar
}

/// Ground-truth grid of a sequence.
pub fn truth_grid(seq: &TomoSequence) -> SurfaceGrid {
    let mut grid = SurfaceGrid::new(seq.layers, seq.depth, seq.width, seq.height);
    for k in 0..seq.layers {
        for d in 0..seq.depth {
            for w in 0..seq.width {
                grid.set(k, d, w, seq.label(k, d, w) as Scalar);
            }
        }
    }
    grid
}

/// The constant midline predictor: row `H / 2` everywhere.
pub fn midline_grid(seq: &TomoSequence) -> SurfaceGrid {
    SurfaceGrid::constant(
        seq.height as Scalar / 2.0,
        seq.layers,
        seq.depth,
        seq.width,
        seq.height,
    )
}

/// Evaluation summary over a set of sequences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    /// Mean absolute column-wise error per layer, pixels.
    pub per_layer_error_px: Vec<f64>,
    /// Arithmetic mean of the per-layer errors.
    pub averaged_error_px: f64,
    /// Wall-clock inference time per sequence, seconds.
    pub inference_seconds_per_sequence: f64,
    pub sequences: usize,
    /// Echo of the run configuration.
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let mean = self.per_layer_error_px.iter().sum::<f64>()
            / self.per_layer_error_px.len() as f64;
        if (mean - self.averaged_error_px).abs() > 1e-12 {
            return Err(Error::Dataset(format!(
                "averaged error {} does not match per-layer mean {}",
                self.averaged_error_px, mean
            )));
        }
        if self.per_layer_error_px.iter().any(|&e| e < 0.0) {
            return Err(Error::Dataset("negative error in report".into()));
        }
        Ok(())
    }
}

/// Run inference over sequences and compare against their ground truth.
///
/// Returns the report (with `config` left null for the caller to fill) and
/// the per-sequence predicted grids.
#[allow(clippy::unnecessary_cast)] // Scalar is f32 under the `f32` feature
pub fn evaluate(
    model: &CombinedModel,
    seqs: &[&TomoSequence],
    normalizer: &PixelNormalizer,
) -> Result<(EvalReport, Vec<SurfaceGrid>)> {
    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let layers = seqs[0].layers;
    // Raw per-layer sums in (sequence, layer, slice, column) order, so the
    // reported means can be reproduced exactly from exported predictions.
    let mut error_sums = vec![0.0; layers];
    let mut cell_count = 0.0;
    let mut grids = Vec::with_capacity(seqs.len());
    let started = Instant::now();
    for seq in seqs {
        let normed = normalizer.normalize_sequence(seq)?;
        let preds = model.predict_sequence(&normed)?;
        let grid = reconstruct_surfaces(&preds, seq.depth, seq.layers, seq.width, seq.height)?;
        let truth = truth_grid(seq);
        if grid.layers != layers {
            return Err(Error::ShapeMismatch {
                op: "evaluate",
                lhs: vec![grid.layers],
                rhs: vec![layers],
            });
        }
        for (k, sum) in error_sums.iter_mut().enumerate() {
            for d in 0..seq.depth {
                for w in 0..seq.width {
                    *sum += (grid.get(k, d, w) - truth.get(k, d, w)).abs();
                }
            }
        }
        cell_count += (seq.depth * seq.width) as Scalar;
        grids.push(grid);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let per_layer: Vec<f64> = error_sums
        .iter()
        .map(|s| (s / cell_count) as f64)
        .collect();
    let report = EvalReport {
        format_version: 1,
        averaged_error_px: per_layer.iter().sum::<f64>() / per_layer.len() as f64,
        per_layer_error_px: per_layer,
        inference_seconds_per_sequence: elapsed / seqs.len() as f64,
        sequences: seqs.len(),
        config: serde_json::Value::Null,
    };
    Ok((report, grids))
}

/// Averaged error of a model over sequences with explicit control of the
/// cross-slice handoff; convenience for ablation probes.
pub fn reconstructed_error(
    model: &CombinedModel,
    seqs: &[&TomoSequence],
    normalizer: &PixelNormalizer,
    carry_across_slices: bool,
) -> Scalar {
    let mut total = 0.0;
    let mut cells = 0.0;
    for seq in seqs {
        let normed = normalizer.normalize_sequence(seq).expect("fitted normalizer");
        let preds = model
            .predict_sequence_with(&normed, carry_across_slices)
            .expect("matching geometry");
        let grid = reconstruct_surfaces(&preds, seq.depth, seq.layers, seq.width, seq.height)
            .expect("complete predictions");
        let per_layer = mean_column_error(&grid, &truth_grid(seq)).expect("same extents");
        let n = (seq.depth * seq.width) as Scalar;
        total += averaged_error(&per_layer) * n;
        cells += n;
    }
    total / cells
}
