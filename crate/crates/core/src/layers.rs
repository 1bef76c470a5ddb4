//! Neural building blocks: 3-D convolution, height-wise max pooling,
//! fully-connected layers, and the column-iterated GRU cell.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

pub use crate::tensor::same_padding;

/// Kernel extents used throughout the convolutional trunk: 3 slices deep,
/// 5 rows tall, 3 columns wide. The tall dimension follows the structure of
/// the data, where the informative intensity changes run vertically.
pub const DEFAULT_KERNEL: [usize; 3] = [3, 5, 3];

/// Default GRU hidden width.
pub const DEFAULT_HIDDEN: usize = 512;

/// Uniform init in `±1/sqrt(fan_in)`.
fn uniform_init(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<Scalar> {
    let bound = 1.0 / (fan_in as Scalar).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

// Weights and biases both draw from ±1/sqrt(fan_in).
fn param(rng: &mut ChaCha8Rng, fan_in: usize, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::param(uniform_init(rng, fan_in, n), shape).expect("static shape")
}

/// 3-D convolution layer, stride 1, zero padding.
pub struct Conv3dLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub padding: [usize; 3],
    in_channels: usize,
}

impl Conv3dLayer {
    /// New layer with `same` padding so spatial extents are preserved.
    pub fn new(in_channels: usize, out_channels: usize, kernel: [usize; 3], rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_channels * kernel[0] * kernel[1] * kernel[2];
        let weight = param(
            rng,
            fan_in,
            &[out_channels, in_channels, kernel[0], kernel[1], kernel[2]],
        );
        let bias = param(rng, fan_in, &[out_channels]);
        Conv3dLayer {
            weight,
            bias,
            padding: same_padding(kernel),
            in_channels,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> [usize; 3] {
        let s = self.weight.shape();
        [s[2], s[3], s[4]]
    }

    /// `[C,D,H,W] -> [out,D',H',W']`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        input.conv3d(&self.weight, &self.bias, self.padding)
    }
}

/// Max pooling over height only: kernel `1x2x1`, stride 2 in height.
pub struct MaxPool3dLayer;

impl MaxPool3dLayer {
    /// Halves the height (floor); depth and width are untouched.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        input.maxpool_height()
    }
}

/// Fully-connected layer `y = W x + b`.
pub struct FcLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl FcLayer {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        FcLayer {
            weight: param(rng, in_dim, &[out_dim, in_dim]),
            bias: param(rng, in_dim, &[out_dim]),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.weight.matvec(input)?.add(&self.bias)
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }
}

/// Fusion of a projected image column with the cross-layer hidden state:
/// elementwise sum, which is differentiable everywhere and commutative.
/// For the first layer the cross-layer argument is the zero vector.
pub fn fuse(column_features: &Tensor, cross_layer_hidden: &Tensor) -> Result<Tensor> {
    column_features.add(cross_layer_hidden)
}

/// Gate structure of the recurrent cell.
///
/// With fused input `x` and previous hidden state `h`:
///
/// ```text
/// z = sigmoid(U_iz x + U_hz h + b_z)
/// r = sigmoid(U_ir x + U_hr h + b_r)
/// n = tanh   (U_in x + U_hn (r ∘ h) + b_n)
/// h' = z ∘ h + (1 - z) ∘ n
/// s  = U_y h' + b_y
/// ```
pub struct GruCell {
    pub u_iz: Tensor,
    pub u_hz: Tensor,
    pub u_ir: Tensor,
    pub u_hr: Tensor,
    pub u_in: Tensor,
    pub u_hn: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_n: Tensor,
    pub u_y: Tensor,
    pub b_y: Tensor,
    hidden_size: usize,
}

impl GruCell {
    pub fn new(hidden_size: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let sq = |rng: &mut ChaCha8Rng| param(rng, hidden_size, &[hidden_size, hidden_size]);
        GruCell {
            u_iz: sq(rng),
            u_hz: sq(rng),
            u_ir: sq(rng),
            u_hr: sq(rng),
            u_in: sq(rng),
            u_hn: sq(rng),
            b_z: param(rng, hidden_size, &[hidden_size]),
            b_r: param(rng, hidden_size, &[hidden_size]),
            b_n: param(rng, hidden_size, &[hidden_size]),
            u_y: param(rng, hidden_size, &[out_dim, hidden_size]),
            b_y: param(rng, hidden_size, &[out_dim]),
            hidden_size,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    /// One iteration: returns the new hidden state and the output.
    pub fn step(&self, fused_input: &Tensor, h_prev: &Tensor) -> Result<(Tensor, Tensor)> {
        let z = self
            .u_iz
            .matvec(fused_input)?
            .add(&self.u_hz.matvec(h_prev)?)?
            .add(&self.b_z)?
            .sigmoid();
        let r = self
            .u_ir
            .matvec(fused_input)?
            .add(&self.u_hr.matvec(h_prev)?)?
            .add(&self.b_r)?
            .sigmoid();
        let gated = r.hadamard(h_prev)?;
        let n = self
            .u_in
            .matvec(fused_input)?
            .add(&self.u_hn.matvec(&gated)?)?
            .add(&self.b_n)?
            .tanh();
        let ones = Tensor::ones(&[self.hidden_size]);
        let keep = z.hadamard(h_prev)?;
        let update = ones.sub(&z)?.hadamard(&n)?;
        let h_new = keep.add(&update)?;
        let s = self.u_y.matvec(&h_new)?.add(&self.b_y)?;
        Ok((h_new, s))
    }

    /// Cell with all parameters at zero. Useful as a reference point: the
    /// gates then sit at sigmoid(0) = 0.5 and the candidate at tanh(0) = 0.
    pub fn zeroed(hidden_size: usize, out_dim: usize) -> Self {
        let sq = || Tensor::param(vec![0.0; hidden_size * hidden_size], &[hidden_size, hidden_size]).unwrap();
        GruCell {
            u_iz: sq(),
            u_hz: sq(),
            u_ir: sq(),
            u_hr: sq(),
            u_in: sq(),
            u_hn: sq(),
            b_z: Tensor::param(vec![0.0; hidden_size], &[hidden_size]).unwrap(),
            b_r: Tensor::param(vec![0.0; hidden_size], &[hidden_size]).unwrap(),
            b_n: Tensor::param(vec![0.0; hidden_size], &[hidden_size]).unwrap(),
            u_y: Tensor::param(vec![0.0; out_dim * hidden_size], &[out_dim, hidden_size]).unwrap(),
            b_y: Tensor::param(vec![0.0; out_dim], &[out_dim]).unwrap(),
            hidden_size,
        }
    }
}
