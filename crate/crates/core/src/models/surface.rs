//! Reconstruction of per-slice column predictions into surfaces.

use crate::data::denormalize_label;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// `K` surfaces over a `D x W` grid of denormalized row coordinates, each
/// in `[1, H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    values: Vec<Scalar>,
    pub layers: usize,
    pub depth: usize,
    pub width: usize,
    pub height: usize,
}

impl SurfaceGrid {
    pub fn new(layers: usize, depth: usize, width: usize, height: usize) -> Self {
        SurfaceGrid {
            values: vec![height as Scalar / 2.0; layers * depth * width],
            layers,
            depth,
            width,
            height,
        }
    }

    /// Grid holding a constant row everywhere (e.g. the midline baseline).
    pub fn constant(row: Scalar, layers: usize, depth: usize, width: usize, height: usize) -> Self {
        SurfaceGrid {
            values: vec![row.clamp(1.0, height as Scalar); layers * depth * width],
            layers,
            depth,
            width,
            height,
        }
    }

    pub fn get(&self, k: usize, d: usize, w: usize) -> Scalar {
        self.values[(k * self.depth + d) * self.width + w]
    }

    pub fn set(&mut self, k: usize, d: usize, w: usize, row: Scalar) {
        self.values[(k * self.depth + d) * self.width + w] = row;
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    /// Number of grid positions where the layer ordering (each boundary
    /// strictly above the next) is violated. Reported, never enforced.
    pub fn ordering_violations(&self) -> usize {
        let mut count = 0;
        for d in 0..self.depth {
            for w in 0..self.width {
                for k in 1..self.layers {
                    if self.get(k - 1, d, w) > self.get(k, d, w) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Assemble per-slice `[K, W]` normalized predictions (one block per slice,
/// in slice order) into a denormalized surface grid.
pub fn reconstruct_surfaces(
    per_slice: &[Vec<Scalar>],
    depth: usize,
    layers: usize,
    width: usize,
    height: usize,
) -> Result<SurfaceGrid> {
    if per_slice.len() != depth {
        return Err(Error::MissingSlice(per_slice.len().min(depth)));
    }
    let mut grid = SurfaceGrid::new(layers, depth, width, height);
    for (d, block) in per_slice.iter().enumerate() {
        if block.len() != layers * width {
            return Err(Error::InvalidShape {
                op: "reconstruct_surfaces",
                shape: vec![block.len()],
                reason: format!("slice {d}: expected {} values", layers * width),
            });
        }
        for k in 0..layers {
            for w in 0..width {
                grid.set(k, d, w, denormalize_label(block[k * width + w], height));
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_slice_grid_is_identity_assembly() {
        let preds = vec![vec![0.0, 0.5, -0.5, 1.0]]; // K=2, W=2
        let grid = reconstruct_surfaces(&preds, 1, 2, 2, 64).unwrap();
        assert_eq!(grid.get(0, 0, 0), 32.0);
        assert_eq!(grid.get(0, 0, 1), 48.0);
        assert_eq!(grid.get(1, 0, 0), 16.0);
        assert_eq!(grid.get(1, 0, 1), 64.0);
    }

    #[test]
    fn out_of_range_predictions_clamp() {
        let preds = vec![vec![1.5, -3.0]]; // K=1, W=2
        let grid = reconstruct_surfaces(&preds, 1, 1, 2, 64).unwrap();
        assert_eq!(grid.get(0, 0, 0), 64.0);
        assert_eq!(grid.get(0, 0, 1), 1.0);
    }

    #[test]
    fn missing_slice_rejected() {
        let preds = vec![vec![0.0, 0.0]];
        assert!(matches!(
            reconstruct_surfaces(&preds, 2, 1, 2, 64),
            Err(Error::MissingSlice(1))
        ));
    }

    #[test]
    fn ordering_violations_counted_not_enforced() {
        let mut grid = SurfaceGrid::new(2, 1, 2, 64);
        grid.set(0, 0, 0, 10.0);
        grid.set(1, 0, 0, 20.0); // ordered
        grid.set(0, 0, 1, 30.0);
        grid.set(1, 0, 1, 25.0); // violated
        assert_eq!(grid.ordering_violations(), 1);
    }
}
