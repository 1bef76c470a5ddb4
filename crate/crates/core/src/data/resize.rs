//! Bicubic resampling (Catmull-Rom kernel, a = -0.5) for images and labels.

use super::TomoSequence;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

const A: Scalar = -0.5;

fn cubic_kernel(t: Scalar) -> Scalar {
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Resample one axis of length `src_len` to `dst_len`. Returns, per output
/// index, the four source taps (clamped to the image) and their weights.
fn taps(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [Scalar; 4])> {
    let scale = src_len as Scalar / dst_len as Scalar;
    (0..dst_len)
        .map(|dst| {
            let src = (dst as Scalar + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut idx = [0usize; 4];
            let mut wt = [0.0; 4];
            for (j, (i_slot, w_slot)) in idx.iter_mut().zip(wt.iter_mut()).enumerate() {
                let offset = j as isize - 1;
                let pos = base as isize + offset;
                *i_slot = pos.clamp(0, src_len as isize - 1) as usize;
                *w_slot = cubic_kernel(frac - offset as Scalar);
            }
            (idx, wt)
        })
        .collect()
}

/// Bicubic resize of an `h0 x w0` image to `h1 x w1`.
pub fn resize_bicubic(
    image: &[Scalar],
    h0: usize,
    w0: usize,
    h1: usize,
    w1: usize,
) -> Result<Vec<Scalar>> {
    if h0 < 4 || w0 < 4 {
        return Err(Error::InvalidShape {
            op: "resize_bicubic",
            shape: vec![h0, w0],
            reason: "source extents must be at least 4".into(),
        });
    }
    if image.len() != h0 * w0 || h1 == 0 || w1 == 0 {
        return Err(Error::InvalidShape {
            op: "resize_bicubic",
            shape: vec![h1, w1],
            reason: format!("image length {} for {h0}x{w0}", image.len()),
        });
    }
    // Vertical pass, then horizontal.
    let row_taps = taps(h0, h1);
    let mut tmp = vec![0.0; h1 * w0];
    for (r, (idx, wt)) in row_taps.iter().enumerate() {
        for c in 0..w0 {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += wt[j] * image[idx[j] * w0 + c];
            }
            tmp[r * w0 + c] = acc;
        }
    }
    let col_taps = taps(w0, w1);
    let mut out = vec![0.0; h1 * w1];
    for r in 0..h1 {
        let row = &tmp[r * w0..(r + 1) * w0];
        for (c, (idx, wt)) in col_taps.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += wt[j] * row[idx[j]];
            }
            out[r * w1 + c] = acc;
        }
    }
    Ok(out)
}

/// Rescale a boundary row by the height ratio, clamped to the new range.
pub fn rescale_label(g: f64, h0: usize, h1: usize) -> f64 {
    (g * h1 as f64 / h0 as f64).clamp(1.0, h1 as f64)
}

/// Resize every slice of a sequence and rescale its labels accordingly.
pub fn resize_sequence_to(seq: &TomoSequence, h1: usize, w1: usize) -> Result<TomoSequence> {
    if seq.height == h1 && seq.width == w1 {
        return Ok(seq.clone());
    }
    let plane_in = seq.height * seq.width;
    let mut slices = Vec::with_capacity(seq.depth * h1 * w1);
    for d in 0..seq.depth {
        let raw: Vec<Scalar> = seq.slices[d * plane_in..(d + 1) * plane_in]
            .iter()
            .map(|&p| p as Scalar)
            .collect();
        let resized = resize_bicubic(&raw, seq.height, seq.width, h1, w1)?;
        slices.extend(resized.iter().map(|&v| v as f32));
    }
    // Labels live on columns; resample columns by nearest source column and
    // rescale the row coordinate by the height ratio.
    let mut labels = Vec::with_capacity(seq.layers * seq.depth * w1);
    for k in 0..seq.layers {
        for d in 0..seq.depth {
            for w in 0..w1 {
                let src_w = ((w as f64 + 0.5) * seq.width as f64 / w1 as f64 - 0.5)
                    .round()
                    .clamp(0.0, seq.width as f64 - 1.0) as usize;
                labels.push(rescale_label(seq.label(k, d, src_w), seq.height, h1));
            }
        }
    }
    Ok(TomoSequence {
        id: seq.id.clone(),
        slices,
        labels,
        depth: seq.depth,
        height: h1,
        width: w1,
        layers: seq.layers,
        params: seq.params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resize_is_exact() {
        let img: Vec<Scalar> = (0..64 * 64).map(|i| (i % 97) as Scalar * 0.13).collect();
        let out = resize_bicubic(&img, 64, 64, 64, 64).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = vec![3.25; 16 * 12];
        let out = resize_bicubic(&img, 16, 12, 7, 9).unwrap();
        for v in out {
            assert!((v - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_extents_rejected() {
        let img = vec![0.0; 3 * 8];
        assert!(resize_bicubic(&img, 3, 8, 4, 4).is_err());
    }

    #[test]
    fn label_rows_scale_with_height_ratio() {
        assert_eq!(rescale_label(100.0, 128, 64), 50.0);
        assert_eq!(rescale_label(1.0, 128, 64), 1.0); // clamped at the top row
    }

    #[test]
    fn downscale_halves_height_labels() {
        let params = super::super::GenParams {
            depth: 2,
            height: 128,
            width: 64,
            air_level: 0.25,
            bed_level: 0.78,
            relief: 0.0,
            noise_sigma: 0.0,
            speckle: 0.0,
            ..Default::default()
        };
        let seq = super::super::generate_sequence(&params).unwrap();
        let small = resize_sequence_to(&seq, 64, 64).unwrap();
        assert_eq!(small.height, 64);
        assert_eq!(small.width, 64);
        assert_eq!(small.label(0, 0, 0), seq.label(0, 0, 0) / 2.0);
        small.validate_labels().unwrap();
    }
}
