//! Synthetic tomographic sequences, the normalization pipeline, windowing,
//! and train/test splitting.
//!
//! Row coordinates are 1-based: a boundary label `g` lies in `[1, H]`, and
//! the pixel at array index `h` covers row `h + 1`. Labels map to the
//! normalized interval `[-1, 1]` via `N(g) = 2 (g - H/2) / H`.

mod io;
mod resize;
mod synth;

pub use io::{load_dataset, load_sequence, save_dataset, save_sequence};
pub use resize::{resize_bicubic, resize_sequence_to, rescale_label};
pub use synth::generate_sequence;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Parameters of the synthetic sequence generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    /// Nominal row of the upper (air) boundary, as a fraction of height.
    pub air_level: f64,
    /// Nominal row of the lower (bed) boundary, as a fraction of height.
    pub bed_level: f64,
    /// Peak-to-center undulation of each surface, in pixels.
    pub relief: f64,
    /// Upper bound on the number of undulation periods across each axis.
    pub waviness: f64,
    /// Peak intensity of the upper boundary band.
    pub air_brightness: f64,
    /// Peak intensity of the lower boundary band; dimmer than the air band.
    pub bed_brightness: f64,
    /// Vertical extent (Gaussian sigma, pixels) of the bright bands.
    pub band_sigma: f64,
    /// Additive Gaussian noise level.
    pub noise_sigma: f64,
    /// Multiplicative speckle strength.
    pub speckle: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            depth: 64,
            height: 64,
            width: 64,
            air_level: 0.3,
            bed_level: 0.72,
            relief: 5.0,
            waviness: 2.0,
            air_brightness: 1.0,
            bed_brightness: 0.6,
            band_sigma: 1.8,
            noise_sigma: 0.25,
            speckle: 0.2,
            seed: 0,
        }
    }
}

/// One generated sequence: `D` slices of `H x W` pixels plus ground-truth
/// boundary rows for each of the `K` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TomoSequence {
    pub id: String,
    /// `[D][H][W]` row-major, stored as f32 to match the on-disk layout.
    pub slices: Vec<f32>,
    /// `[K][D][W]` row-major boundary rows, each in `[1, H]`.
    pub labels: Vec<f64>,
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub params: GenParams,
}

impl TomoSequence {
    pub fn slice(&self, d: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.slices[d * n..(d + 1) * n]
    }

    pub fn label(&self, k: usize, d: usize, w: usize) -> f64 {
        self.labels[(k * self.depth + d) * self.width + w]
    }

    /// Check the label invariants: every row within `[1, H]` and the air
    /// boundary strictly above the bed boundary everywhere.
    pub fn validate_labels(&self) -> Result<()> {
        for d in 0..self.depth {
            for w in 0..self.width {
                for k in 0..self.layers {
                    let g = self.label(k, d, w);
                    if !(1.0..=self.height as f64).contains(&g) {
                        return Err(Error::LabelOutOfRange {
                            value: g,
                            height: self.height,
                        });
                    }
                }
                for k in 1..self.layers {
                    if self.label(k - 1, d, w) >= self.label(k, d, w) {
                        return Err(Error::Generation(format!(
                            "boundary ordering violated at d={d} w={w}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Map a boundary row `g in [1, H]` to the normalized interval `[-1, 1]`.
#[allow(clippy::unnecessary_cast)] // Scalar is f32 under the `f32` feature
pub fn normalize_label(g: Scalar, height: usize) -> Result<Scalar> {
    let h = height as Scalar;
    if !(1.0..=h).contains(&g) {
        return Err(Error::LabelOutOfRange {
            value: g as f64,
            height,
        });
    }
    Ok(2.0 * (g - h / 2.0) / h)
}

/// Inverse of [`normalize_label`], clamped to the valid row range.
pub fn denormalize_label(n: Scalar, height: usize) -> Scalar {
    let h = height as Scalar;
    (n * h / 2.0 + h / 2.0).clamp(1.0, h)
}

/// Pixel normalization: per-sequence affine mapping of the raw range to
/// `[-1, 1]` followed by subtraction of a scalar mean computed over all
/// training pixels.
#[derive(Debug, Clone, Default)]
pub struct PixelNormalizer {
    mean: Option<Scalar>,
}

impl PixelNormalizer {
    /// Unfitted normalizer; using it before [`PixelNormalizer::fit`] is an error.
    pub fn new() -> Self {
        PixelNormalizer { mean: None }
    }

    /// Restore a fitted normalizer (e.g. when loading a checkpoint).
    pub fn from_mean(mean: Scalar) -> Self {
        PixelNormalizer { mean: Some(mean) }
    }

    pub fn mean(&self) -> Option<Scalar> {
        self.mean
    }

    /// Fit the training mean: the average of all range-scaled training pixels.
    pub fn fit(&mut self, train: &[&TomoSequence]) -> Result<()> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for seq in train {
            let (lo, hi) = raw_range(seq);
            let span = range_span(lo, hi);
            for &p in &seq.slices {
                total += 2.0 * (p as Scalar - lo) / span - 1.0;
                count += 1;
            }
        }
        self.mean = Some(total / count as Scalar);
        Ok(())
    }

    /// Normalize one sequence: pixels to `[-1, 1]` minus the training mean,
    /// labels through `N`.
    pub fn normalize_sequence(&self, seq: &TomoSequence) -> Result<NormalizedSequence> {
        let mean = self.mean.ok_or(Error::NormalizerNotFitted)?;
        let (lo, hi) = raw_range(seq);
        let span = range_span(lo, hi);
        let plane = seq.height * seq.width;
        let mut slices = Vec::with_capacity(seq.depth);
        for d in 0..seq.depth {
            let raw = &seq.slices[d * plane..(d + 1) * plane];
            let normed: Vec<Scalar> = raw
                .iter()
                .map(|&p| 2.0 * (p as Scalar - lo) / span - 1.0 - mean)
                .collect();
            slices.push(normed);
        }
        let mut labels = Vec::with_capacity(seq.labels.len());
        for &g in &seq.labels {
            labels.push(normalize_label(g as Scalar, seq.height)?);
        }
        Ok(NormalizedSequence {
            slices,
            labels,
            depth: seq.depth,
            height: seq.height,
            width: seq.width,
            layers: seq.layers,
            raw_min: lo,
            raw_max: hi,
        })
    }
}

fn raw_range(seq: &TomoSequence) -> (Scalar, Scalar) {
    let mut lo = Scalar::INFINITY;
    let mut hi = Scalar::NEG_INFINITY;
    for &p in &seq.slices {
        let v = p as Scalar;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn range_span(lo: Scalar, hi: Scalar) -> Scalar {
    // A constant image maps to the interval midpoint.
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Invert the pixel normalization given the sequence's raw range.
pub fn denormalize_pixel(n: Scalar, lo: Scalar, hi: Scalar, mean: Scalar) -> Scalar {
    (n + mean + 1.0) / 2.0 * range_span(lo, hi) + lo
}

/// A fully normalized sequence ready for windowing.
#[derive(Debug, Clone)]
pub struct NormalizedSequence {
    /// `D` slices of `[H * W]` pixels in normalized units.
    pub slices: Vec<Vec<Scalar>>,
    /// `[K][D][W]` normalized labels in `[-1, 1]`.
    pub labels: Vec<Scalar>,
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub raw_min: Scalar,
    pub raw_max: Scalar,
}

impl NormalizedSequence {
    pub fn label(&self, k: usize, d: usize, w: usize) -> Scalar {
        self.labels[(k * self.depth + d) * self.width + w]
    }

    /// Normalized `[K, W]` label block for one slice.
    pub fn slice_targets(&self, d: usize) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(self.layers * self.width);
        for k in 0..self.layers {
            let base = (k * self.depth + d) * self.width;
            out.extend_from_slice(&self.labels[base..base + self.width]);
        }
        out
    }
}

/// One training sample: an `L`-slice window around a center slice, the
/// center slice itself, and the center slice's normalized labels.
#[derive(Debug, Clone)]
pub struct WindowSample {
    /// `[1, L, H, W]` flattened.
    pub window: Vec<Scalar>,
    /// `[H, W]` flattened.
    pub center: Vec<Scalar>,
    /// `[K, W]` flattened, in normalized label units.
    pub target: Vec<Scalar>,
    pub center_index: usize,
}

/// Cut a sequence into one window per slice. Slices beyond the ends are
/// filled by replicating the edge slice, so `D = 7, L = 5` yields 7 windows
/// and the first is `[I1, I1, I1, I2, I3]`.
pub fn window(seq: &NormalizedSequence, window_len: usize) -> Result<Vec<WindowSample>> {
    if window_len.is_multiple_of(2) {
        return Err(Error::EvenWindow(window_len));
    }
    let half = (window_len - 1) / 2;
    let plane = seq.height * seq.width;
    let mut out = Vec::with_capacity(seq.depth);
    for d in 0..seq.depth {
        let mut window_px = Vec::with_capacity(window_len * plane);
        for offset in 0..window_len {
            let src = (d + offset).saturating_sub(half).min(seq.depth - 1);
            window_px.extend_from_slice(&seq.slices[src]);
        }
        out.push(WindowSample {
            window: window_px,
            center: seq.slices[d].clone(),
            target: seq.slice_targets(d),
            center_index: d,
        });
    }
    Ok(out)
}

/// Seed-deterministic disjoint split of `n` sub-sequences into train/test
/// index sets, with `round(n * ratio)` (at least 1, at most `n - 1`) going
/// to the training side.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    if n < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 sub-sequences to split, got {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
    let mut train = indices[..n_train].to_vec();
    let mut test = indices[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sequence() -> TomoSequence {
        let params = GenParams {
            depth: 3,
            height: 8,
            width: 4,
            relief: 0.0,
            noise_sigma: 0.0,
            speckle: 0.0,
            air_level: 0.25,
            bed_level: 0.75,
            ..GenParams::default()
        };
        generate_sequence(&params).unwrap()
    }

    #[test]
    fn label_normalization_fixed_points() {
        assert_eq!(normalize_label(32.0, 64).unwrap(), 0.0);
        assert_eq!(normalize_label(64.0, 64).unwrap(), 1.0);
        assert_eq!(normalize_label(48.0, 64).unwrap(), 0.5);
        assert!(normalize_label(0.5, 64).is_err());
        assert!(normalize_label(65.0, 64).is_err());
    }

    #[test]
    fn label_denormalization_and_clamping() {
        assert_eq!(denormalize_label(0.0, 64), 32.0);
        assert_eq!(denormalize_label(-3.0, 64), 1.0);
        assert_eq!(denormalize_label(1.5, 64), 64.0);
    }

    #[test]
    fn label_roundtrip_exact_on_integer_rows() {
        for g in 1..=64 {
            let g = g as Scalar;
            let n = normalize_label(g, 64).unwrap();
            assert_eq!(denormalize_label(n, 64), g);
        }
    }

    #[test]
    fn normalizer_requires_fit() {
        let seq = tiny_sequence();
        let norm = PixelNormalizer::new();
        assert!(matches!(
            norm.normalize_sequence(&seq),
            Err(Error::NormalizerNotFitted)
        ));
    }

    #[test]
    fn normalizer_maps_endpoints_and_cancels_mean() {
        let seq = tiny_sequence();
        let mut norm = PixelNormalizer::new();
        norm.fit(&[&seq]).unwrap();
        let mean = norm.mean().unwrap();
        let out = norm.normalize_sequence(&seq).unwrap();
        let all: Vec<Scalar> = out.slices.iter().flatten().copied().collect();
        let lo = all.iter().cloned().fold(Scalar::INFINITY, Scalar::min);
        let hi = all.iter().cloned().fold(Scalar::NEG_INFINITY, Scalar::max);
        // Before mean subtraction the range is [-1, 1]; after, it is shifted.
        assert!((lo - (-1.0 - mean)).abs() < 1e-12);
        assert!((hi - (1.0 - mean)).abs() < 1e-12);
        // The average of all normalized training pixels is zero.
        let avg: Scalar = all.iter().sum::<Scalar>() / all.len() as Scalar;
        assert!(avg.abs() < 1e-9, "residual mean {avg}");
    }

    #[test]
    fn pixel_roundtrip_within_tolerance() {
        let seq = tiny_sequence();
        let mut norm = PixelNormalizer::new();
        norm.fit(&[&seq]).unwrap();
        let out = norm.normalize_sequence(&seq).unwrap();
        let mean = norm.mean().unwrap();
        for (d, slice) in out.slices.iter().enumerate() {
            for (i, &n) in slice.iter().enumerate() {
                let raw = seq.slice(d)[i] as Scalar;
                let back = denormalize_pixel(n, out.raw_min, out.raw_max, mean);
                assert!((raw - back).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn window_counts_and_edge_replication() {
        let params = GenParams {
            depth: 7,
            height: 8,
            width: 4,
            relief: 0.4,
            noise_sigma: 0.0,
            speckle: 0.0,
            ..GenParams::default()
        };
        let seq = generate_sequence(&params).unwrap();
        let mut norm = PixelNormalizer::new();
        norm.fit(&[&seq]).unwrap();
        let ns = norm.normalize_sequence(&seq).unwrap();
        let windows = window(&ns, 5).unwrap();
        assert_eq!(windows.len(), 7);
        // First window is [I1, I1, I1, I2, I3].
        let plane = ns.height * ns.width;
        let w0 = &windows[0].window;
        assert_eq!(&w0[0..plane], ns.slices[0].as_slice());
        assert_eq!(&w0[plane..2 * plane], ns.slices[0].as_slice());
        assert_eq!(&w0[2 * plane..3 * plane], ns.slices[0].as_slice());
        assert_eq!(&w0[3 * plane..4 * plane], ns.slices[1].as_slice());
        assert_eq!(&w0[4 * plane..5 * plane], ns.slices[2].as_slice());
        // Degenerate single-slice windows for the 2-D variant.
        let w1 = window(&ns, 1).unwrap();
        assert_eq!(w1.len(), 7);
        assert_eq!(w1[3].window, ns.slices[3]);
        // Even lengths are rejected.
        assert!(matches!(window(&ns, 4), Err(Error::EvenWindow(4))));
    }

    #[test]
    fn window_targets_are_normalized_center_labels() {
        let seq = tiny_sequence();
        let mut norm = PixelNormalizer::new();
        norm.fit(&[&seq]).unwrap();
        let ns = norm.normalize_sequence(&seq).unwrap();
        let windows = window(&ns, 3).unwrap();
        for (d, sample) in windows.iter().enumerate() {
            assert!(sample.target.iter().all(|t| (-1.0..=1.0).contains(t)));
            assert_eq!(sample.target, ns.slice_targets(d));
        }
    }

    #[test]
    fn split_is_deterministic_disjoint_exhaustive() {
        let (train, test) = split_indices(10, 0.6, 9).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 4);
        let again = split_indices(10, 0.6, 9).unwrap();
        assert_eq!((train.clone(), test.clone()), again);
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_indices(10, 1.2, 0).is_err());
        assert!(split_indices(1, 0.6, 0).is_err());
    }
}
