//! Central finite-difference gradient checking.
//!
//! The numeric side rebuilds the computation from a flat parameter vector on
//! every probe, so it shares no code path with the analytic backward pass it
//! is checking.

use crate::tensor::Scalar;

/// Default probe step for 64-bit checks.
pub const DEFAULT_STEP: Scalar = 1e-5;

/// Central-difference gradient of `f` at `theta`, one probe pair per entry.
///
/// Probes are independent, so they are swept by a small pool of scoped
/// threads; the result is identical to the sequential sweep.
pub fn central_difference<F>(f: &F, theta: &[Scalar], step: Scalar) -> Vec<Scalar>
where
    F: Fn(&[Scalar]) -> Scalar + Sync,
{
    let n = theta.len();
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .clamp(1, 8);
    let chunk = n.div_ceil(workers);
    let mut grad = vec![0.0; n];
    std::thread::scope(|scope| {
        for (w, out_chunk) in grad.chunks_mut(chunk).enumerate() {
            let start = w * chunk;
            scope.spawn(move || {
                let mut probe = theta.to_vec();
                for (j, slot) in out_chunk.iter_mut().enumerate() {
                    let i = start + j;
                    let saved = probe[i];
                    probe[i] = saved + step;
                    let plus = f(&probe);
                    probe[i] = saved - step;
                    let minus = f(&probe);
                    probe[i] = saved;
                    *slot = (plus - minus) / (2.0 * step);
                }
            });
        }
    });
    grad
}

/// Floor on the relative-error denominator. Central differences carry an
/// absolute noise floor (roundoff amplified by 1/step, curvature terms of
/// order step^2), so gradient entries far below this scale can only be
/// compared absolutely.
pub const DEFAULT_FLOOR: Scalar = 1e-5;

/// Relative error `|a - b| / max(|a| + |b|, floor)`.
pub fn relative_error(a: Scalar, b: Scalar) -> Scalar {
    relative_error_floored(a, b, DEFAULT_FLOOR)
}

pub fn relative_error_floored(a: Scalar, b: Scalar, floor: Scalar) -> Scalar {
    let denom = (a.abs() + b.abs()).max(floor);
    (a - b).abs() / denom
}

/// Worst relative error over two gradient vectors.
pub fn max_relative_error(analytic: &[Scalar], numeric: &[Scalar]) -> Scalar {
    max_relative_error_floored(analytic, numeric, DEFAULT_FLOOR)
}

/// Worst relative error with an explicit denominator floor.
///
/// The floor must sit above the probe's absolute noise band, which for a
/// central difference is roughly `f64 epsilon * |loss| / step` plus any
/// rectifier kinks inside the probe window.
pub fn max_relative_error_floored(
    analytic: &[Scalar],
    numeric: &[Scalar],
    floor: Scalar,
) -> Scalar {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| relative_error_floored(a, n, floor))
        .fold(0.0, Scalar::max)
}
