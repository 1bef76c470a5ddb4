//! Shared oracle implementations for the integration and acceptance tests.
//!
//! These are direct loop transcriptions, deliberately independent of the
//! engine's kernels.

// Each test target compiles this module separately and uses its own subset.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tomoseg_core::eval::mean_column_error;
use tomoseg_core::layers::GruCell;
use tomoseg_core::models::SurfaceGrid;
use tomoseg_core::tensor::{Scalar, Tensor};

pub const TOL: Scalar = 1e-12;

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Scalar> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Six nested loops over the kernel and output volume, plus explicit
/// zero-padding bounds checks.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_oracle(
    input: &[Scalar],
    (c_in, d, h, w): (usize, usize, usize, usize),
    weight: &[Scalar],
    (c_out, kd, kh, kw): (usize, usize, usize, usize),
    bias: &[Scalar],
    pad: [usize; 3],
) -> Vec<Scalar> {
    let od = d + 2 * pad[0] - kd + 1;
    let oh = h + 2 * pad[1] - kh + 1;
    let ow = w + 2 * pad[2] - kw + 1;
    let mut out = vec![0.0; c_out * od * oh * ow];
    for o in 0..c_out {
        for zd in 0..od {
            for zh in 0..oh {
                for zw in 0..ow {
                    let mut acc = bias[o];
                    for c in 0..c_in {
                        for a in 0..kd {
                            for b in 0..kh {
                                for q in 0..kw {
                                    let id = zd as isize + a as isize - pad[0] as isize;
                                    let ih = zh as isize + b as isize - pad[1] as isize;
                                    let iw = zw as isize + q as isize - pad[2] as isize;
                                    if id < 0
                                        || id >= d as isize
                                        || ih < 0
                                        || ih >= h as isize
                                        || iw < 0
                                        || iw >= w as isize
                                    {
                                        continue;
                                    }
                                    let iv = input[((c * d + id as usize) * h + ih as usize) * w
                                        + iw as usize];
                                    let wv = weight[(((o * c_in + c) * kd + a) * kh + b) * kw + q];
                                    acc += iv * wv;
                                }
                            }
                        }
                    }
                    out[((o * od + zd) * oh + zh) * ow + zw] = acc;
                }
            }
        }
    }
    out
}

pub fn sigmoid(x: Scalar) -> Scalar {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar transcription of the five gate equations, one hidden unit at a
/// time.
pub struct GruOracle {
    pub hidden: usize,
    pub u_iz: Vec<Scalar>,
    pub u_hz: Vec<Scalar>,
    pub u_ir: Vec<Scalar>,
    pub u_hr: Vec<Scalar>,
    pub u_in: Vec<Scalar>,
    pub u_hn: Vec<Scalar>,
    pub b_z: Vec<Scalar>,
    pub b_r: Vec<Scalar>,
    pub b_n: Vec<Scalar>,
    pub u_y: Vec<Scalar>,
    pub b_y: Vec<Scalar>,
}

impl GruOracle {
    pub fn step(&self, x: &[Scalar], h_prev: &[Scalar]) -> (Vec<Scalar>, Vec<Scalar>) {
        let n = self.hidden;
        let mat_row = |m: &[Scalar], i: usize, v: &[Scalar]| -> Scalar {
            let mut acc = 0.0;
            for j in 0..n {
                acc += m[i * n + j] * v[j];
            }
            acc
        };
        let mut z = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            z[i] = sigmoid(mat_row(&self.u_iz, i, x) + mat_row(&self.u_hz, i, h_prev) + self.b_z[i]);
            r[i] = sigmoid(mat_row(&self.u_ir, i, x) + mat_row(&self.u_hr, i, h_prev) + self.b_r[i]);
        }
        let gated: Vec<Scalar> = (0..n).map(|i| r[i] * h_prev[i]).collect();
        let mut h_new = vec![0.0; n];
        for (i, slot) in h_new.iter_mut().enumerate() {
            let cand = (mat_row(&self.u_in, i, x) + mat_row(&self.u_hn, i, &gated) + self.b_n[i])
                .tanh();
            *slot = z[i] * h_prev[i] + (1.0 - z[i]) * cand;
        }
        let out_dim = self.b_y.len();
        let mut s = vec![0.0; out_dim];
        for (i, slot) in s.iter_mut().enumerate() {
            let mut acc = self.b_y[i];
            for (j, h) in h_new.iter().enumerate() {
                acc += self.u_y[i * n + j] * h;
            }
            *slot = acc;
        }
        (h_new, s)
    }
}

/// Direct triple loop over layers, slices and columns.
pub fn column_error_oracle(
    pred: &[Scalar],
    truth: &[Scalar],
    layers: usize,
    depth: usize,
    width: usize,
) -> Vec<Scalar> {
    let mut out = vec![0.0; layers];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut total = 0.0;
        for d in 0..depth {
            for w in 0..width {
                let i = (k * depth + d) * width + w;
                total += (pred[i] - truth[i]).abs();
            }
        }
        *slot = total / (depth * width) as Scalar;
    }
    out
}

/// Randomized conv sweep; returns the number of instances checked.
pub fn conv_sweep(cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let c_in = rng.random_range(1..3usize);
        let c_out = rng.random_range(1..3usize);
        let d = rng.random_range(1..4usize);
        let h = rng.random_range(2..7usize);
        let w = rng.random_range(2..6usize);
        let kd = rng.random_range(1..=d.min(3));
        let kh = rng.random_range(1..=h.min(5));
        let kw = rng.random_range(1..=w.min(3));
        let pad = if rng.random_range(0..2) == 1 {
            [(kd - 1) / 2, (kh - 1) / 2, (kw - 1) / 2]
        } else {
            [0, 0, 0]
        };
        let input = random_vec(&mut rng, c_in * d * h * w);
        let weight = random_vec(&mut rng, c_out * c_in * kd * kh * kw);
        let bias = random_vec(&mut rng, c_out);
        let expected = conv3d_oracle(
            &input,
            (c_in, d, h, w),
            &weight,
            (c_out, kd, kh, kw),
            &bias,
            pad,
        );
        let it = Tensor::from_vec(input, &[c_in, d, h, w]).unwrap();
        let wt = Tensor::from_vec(weight, &[c_out, c_in, kd, kh, kw]).unwrap();
        let bt = Tensor::from_vec(bias, &[c_out]).unwrap();
        let got = it.conv3d(&wt, &bt, pad).unwrap().to_vec();
        assert_eq!(got.len(), expected.len(), "case {case}");
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < TOL, "conv case {case}: {g} vs {e}");
        }
    }
    cases
}

/// Randomized GRU-step sweep; returns the number of instances checked.
pub fn gru_sweep(cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let hidden = rng.random_range(1..9usize);
        let out_dim = rng.random_range(1..4usize);
        let sq = hidden * hidden;
        let oracle = GruOracle {
            hidden,
            u_iz: random_vec(&mut rng, sq),
            u_hz: random_vec(&mut rng, sq),
            u_ir: random_vec(&mut rng, sq),
            u_hr: random_vec(&mut rng, sq),
            u_in: random_vec(&mut rng, sq),
            u_hn: random_vec(&mut rng, sq),
            b_z: random_vec(&mut rng, hidden),
            b_r: random_vec(&mut rng, hidden),
            b_n: random_vec(&mut rng, hidden),
            u_y: random_vec(&mut rng, out_dim * hidden),
            b_y: random_vec(&mut rng, out_dim),
        };
        let mut seed_rng = ChaCha8Rng::seed_from_u64(case as u64);
        let cell = GruCell::new(hidden, out_dim, &mut seed_rng);
        cell.u_iz.set_data(&oracle.u_iz).unwrap();
        cell.u_hz.set_data(&oracle.u_hz).unwrap();
        cell.u_ir.set_data(&oracle.u_ir).unwrap();
        cell.u_hr.set_data(&oracle.u_hr).unwrap();
        cell.u_in.set_data(&oracle.u_in).unwrap();
        cell.u_hn.set_data(&oracle.u_hn).unwrap();
        cell.b_z.set_data(&oracle.b_z).unwrap();
        cell.b_r.set_data(&oracle.b_r).unwrap();
        cell.b_n.set_data(&oracle.b_n).unwrap();
        cell.u_y.set_data(&oracle.u_y).unwrap();
        cell.b_y.set_data(&oracle.b_y).unwrap();
        let x = random_vec(&mut rng, hidden);
        let h_prev = random_vec(&mut rng, hidden);
        let (h_expect, s_expect) = oracle.step(&x, &h_prev);
        let xt = Tensor::from_vec(x, &[hidden]).unwrap();
        let ht = Tensor::from_vec(h_prev, &[hidden]).unwrap();
        let (h_got, s_got) = cell.step(&xt, &ht).unwrap();
        for (g, e) in h_got.to_vec().iter().zip(h_expect.iter()) {
            assert!((g - e).abs() < TOL, "gru case {case} hidden: {g} vs {e}");
        }
        for (g, e) in s_got.to_vec().iter().zip(s_expect.iter()) {
            assert!((g - e).abs() < TOL, "gru case {case} output: {g} vs {e}");
        }
    }
    cases
}

/// Randomized metric sweep; returns the number of instances checked.
pub fn metric_sweep(cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let layers = rng.random_range(1..4usize);
        let depth = rng.random_range(1..5usize);
        let width = rng.random_range(1..6usize);
        let n = layers * depth * width;
        let pred_rows: Vec<Scalar> = (0..n).map(|_| rng.random_range(1.0..64.0)).collect();
        let truth_rows: Vec<Scalar> = (0..n).map(|_| rng.random_range(1.0..64.0)).collect();
        let expected = column_error_oracle(&pred_rows, &truth_rows, layers, depth, width);
        let mut pred = SurfaceGrid::new(layers, depth, width, 64);
        let mut truth = SurfaceGrid::new(layers, depth, width, 64);
        let mut i = 0;
        for k in 0..layers {
            for d in 0..depth {
                for w in 0..width {
                    pred.set(k, d, w, pred_rows[i]);
                    truth.set(k, d, w, truth_rows[i]);
                    i += 1;
                }
            }
        }
        let got = mean_column_error(&pred, &truth).unwrap();
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < TOL, "metric case {case}: {g} vs {e}");
        }
    }
    cases
}
