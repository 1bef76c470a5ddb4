//! Synthetic echogram-style sequence generation.
//!
//! Two smooth surfaces (low-frequency sinusoid mixtures over slice and
//! column position) are rendered as bright horizontal bands with Gaussian
//! vertical falloff, the lower band dimmer than the upper one, then additive
//! Gaussian noise and multiplicative speckle are applied. Labels are the
//! exact surface rows before any noise.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GenParams, TomoSequence};
use crate::error::{Error, Result};

const MAX_RETRIES: usize = 32;
/// Minimum clearance, in pixels, between the two surfaces.
const MIN_GAP: f64 = 2.0;

struct SurfaceWave {
    base: f64,
    terms: Vec<(f64, f64, f64, f64, f64)>, // (amp, freq_d, phase_d, freq_w, phase_w)
    norm: f64,
}

impl SurfaceWave {
    fn sample(rng: &mut ChaCha8Rng, base: f64, relief: f64, waviness: f64) -> Self {
        let mut terms = Vec::with_capacity(3);
        let mut total_amp = 0.0;
        for _ in 0..3 {
            let amp: f64 = rng.random_range(0.3..1.0);
            let freq_d: f64 = rng.random_range(0.25..waviness.max(0.3));
            let freq_w: f64 = rng.random_range(0.25..waviness.max(0.3));
            let phase_d: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let phase_w: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            total_amp += amp;
            terms.push((amp, freq_d, phase_d, freq_w, phase_w));
        }
        let norm = if total_amp > 0.0 {
            relief / total_amp
        } else {
            0.0
        };
        SurfaceWave { base, terms, norm }
    }

    fn row(&self, d: usize, w: usize, depth: usize, width: usize) -> f64 {
        let du = d as f64 / depth as f64;
        let wu = w as f64 / width as f64;
        let mut v = 0.0;
        for &(amp, fd, pd, fw, pw) in &self.terms {
            v += amp
                * (std::f64::consts::TAU * fd * du + pd).sin()
                * (std::f64::consts::TAU * fw * wu + pw).cos();
        }
        self.base + self.norm * v
    }
}

/// Generate one sequence. Surfaces that would violate the ordering or leave
/// the image are resampled a bounded number of times before giving up.
pub fn generate_sequence(params: &GenParams) -> Result<TomoSequence> {
    if params.depth == 0 || params.height == 0 || params.width == 0 {
        return Err(Error::Generation("extents must be positive".into()));
    }
    if params.noise_sigma < 0.0 || params.speckle < 0.0 {
        return Err(Error::Generation("noise levels must be non-negative".into()));
    }
    let (depth, height, width) = (params.depth, params.height, params.width);
    let h = height as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Draw the two surfaces, retrying until they are ordered and in range.
    let mut chosen: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..MAX_RETRIES {
        let air = SurfaceWave::sample(&mut rng, params.air_level * h, params.relief, params.waviness);
        let bed = SurfaceWave::sample(&mut rng, params.bed_level * h, params.relief, params.waviness);
        let mut air_rows = vec![0.0; depth * width];
        let mut bed_rows = vec![0.0; depth * width];
        let mut ok = true;
        'grid: for d in 0..depth {
            for w in 0..width {
                let a = air.row(d, w, depth, width);
                let b = bed.row(d, w, depth, width);
                if a < 1.0 || b > h || a + MIN_GAP > b {
                    ok = false;
                    break 'grid;
                }
                air_rows[d * width + w] = a;
                bed_rows[d * width + w] = b;
            }
        }
        if ok {
            chosen = Some((air_rows, bed_rows));
            break;
        }
    }
    let (air_rows, bed_rows) = chosen.ok_or_else(|| {
        Error::Generation(format!(
            "could not draw ordered surfaces within {MAX_RETRIES} attempts; \
             relief {} too large for levels {} / {}",
            params.relief, params.air_level, params.bed_level
        ))
    })?;

    // Render bright bands plus noise.
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut slices = vec![0.0f32; depth * height * width];
    for d in 0..depth {
        for w in 0..width {
            let ga = air_rows[d * width + w];
            let gb = bed_rows[d * width + w];
            for hp in 0..height {
                let row = (hp + 1) as f64;
                let da = (row - ga) / params.band_sigma;
                let db = (row - gb) / params.band_sigma;
                let mut v = params.air_brightness * (-0.5 * da * da).exp()
                    + params.bed_brightness * (-0.5 * db * db).exp();
                if params.speckle > 0.0 {
                    v *= 1.0 + params.speckle * noise.sample(&mut rng);
                }
                if params.noise_sigma > 0.0 {
                    v += params.noise_sigma * noise.sample(&mut rng);
                }
                slices[(d * height + hp) * width + w] = v as f32;
            }
        }
    }

    // Labels are the exact surface rows, ordered air then bed.
    let mut labels = Vec::with_capacity(2 * depth * width);
    labels.extend_from_slice(&air_rows);
    labels.extend_from_slice(&bed_rows);

    let seq = TomoSequence {
        id: format!("seq-{:08x}", params.seed),
        slices,
        labels,
        depth,
        height,
        width,
        layers: 2,
        params: params.clone(),
    };
    seq.validate_labels()?;
    Ok(seq)
}
