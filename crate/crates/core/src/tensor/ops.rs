//! Forward definitions and backward rules for the primitive operations.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub(crate) enum Op {
    Leaf,
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    /// Elementwise (Hadamard) product.
    Mul(Tensor, Tensor),
    Scale(Tensor, Scalar),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Relu(Tensor),
    /// `[m,k] x [k,n] -> [m,n]`
    MatMul(Tensor, Tensor),
    /// `[m,k] x [k] -> [m]`
    MatVec(Tensor, Tensor),
    Sum(Tensor),
    Reshape(Tensor),
    Slice {
        input: Tensor,
        axis: usize,
        start: usize,
        len: usize,
    },
    Concat {
        inputs: Vec<Tensor>,
        axis: usize,
    },
    Conv3d {
        input: Tensor,
        weight: Tensor,
        bias: Tensor,
        pad: [usize; 3],
    },
    MaxPoolH {
        input: Tensor,
        /// Flat input index of the winning element per output element.
        argmax: Vec<usize>,
    },
}

impl Op {
    pub(crate) fn for_each_input(&self, f: &mut dyn FnMut(&Tensor)) {
        match self {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::MatVec(a, b) => {
                f(a);
                f(b);
            }
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Sum(a)
            | Op::Reshape(a)
            | Op::Slice { input: a, .. }
            | Op::MaxPoolH { input: a, .. } => f(a),
            Op::Concat { inputs, .. } => {
                for t in inputs {
                    f(t);
                }
            }
            Op::Conv3d {
                input,
                weight,
                bias,
                ..
            } => {
                f(input);
                f(weight);
                f(bias);
            }
        }
    }

    /// Propagate `grad_out` (gradient of the loss w.r.t. `out`) into the
    /// inputs of this operation.
    pub(crate) fn backward(&self, grad_out: &[Scalar], out: &Tensor) {
        match self {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if a.requires_grad() {
                    a.accumulate_grad(grad_out);
                }
                if b.requires_grad() {
                    b.accumulate_grad(grad_out);
                }
            }
            Op::Sub(a, b) => {
                if a.requires_grad() {
                    a.accumulate_grad(grad_out);
                }
                if b.requires_grad() {
                    let neg: Vec<Scalar> = grad_out.iter().map(|g| -g).collect();
                    b.accumulate_grad(&neg);
                }
            }
            Op::Mul(a, b) => {
                if a.requires_grad() {
                    let bd = b.data();
                    let da: Vec<Scalar> = grad_out.iter().zip(bd.iter()).map(|(g, v)| g * v).collect();
                    drop(bd);
                    a.accumulate_grad(&da);
                }
                if b.requires_grad() {
                    let ad = a.data();
                    let db: Vec<Scalar> = grad_out.iter().zip(ad.iter()).map(|(g, v)| g * v).collect();
                    drop(ad);
                    b.accumulate_grad(&db);
                }
            }
            Op::Scale(a, c) => {
                if a.requires_grad() {
                    let da: Vec<Scalar> = grad_out.iter().map(|g| g * c).collect();
                    a.accumulate_grad(&da);
                }
            }
            Op::Sigmoid(a) => {
                if a.requires_grad() {
                    let od = out.data();
                    let da: Vec<Scalar> = grad_out
                        .iter()
                        .zip(od.iter())
                        .map(|(g, &s)| g * s * (1.0 - s))
                        .collect();
                    drop(od);
                    a.accumulate_grad(&da);
                }
            }
            Op::Tanh(a) => {
                if a.requires_grad() {
                    let od = out.data();
                    let da: Vec<Scalar> = grad_out
                        .iter()
                        .zip(od.iter())
                        .map(|(g, &t)| g * (1.0 - t * t))
                        .collect();
                    drop(od);
                    a.accumulate_grad(&da);
                }
            }
            Op::Relu(a) => {
                if a.requires_grad() {
                    let ad = a.data();
                    let da: Vec<Scalar> = grad_out
                        .iter()
                        .zip(ad.iter())
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    drop(ad);
                    a.accumulate_grad(&da);
                }
            }
            Op::MatMul(a, b) => {
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = b.shape()[1];
                if a.requires_grad() {
                    // dA = G * B^T
                    let bd = b.data();
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let g = grad_out[i * n + j];
                            if g != 0.0 {
                                for p in 0..k {
                                    da[i * k + p] += g * bd[p * n + j];
                                }
                            }
                        }
                    }
                    drop(bd);
                    a.accumulate_grad(&da);
                }
                if b.requires_grad() {
                    // dB = A^T * G
                    let ad = a.data();
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = ad[i * k + p];
                            if av != 0.0 {
                                for j in 0..n {
                                    db[p * n + j] += av * grad_out[i * n + j];
                                }
                            }
                        }
                    }
                    drop(ad);
                    b.accumulate_grad(&db);
                }
            }
            Op::MatVec(mat, vec) => {
                let (m, k) = (mat.shape()[0], mat.shape()[1]);
                if mat.requires_grad() {
                    // dM[i,p] = g[i] * v[p]
                    let vd = vec.data();
                    let mut dm = vec![0.0; m * k];
                    for i in 0..m {
                        let g = grad_out[i];
                        if g != 0.0 {
                            let row = &mut dm[i * k..(i + 1) * k];
                            for (slot, &v) in row.iter_mut().zip(vd.iter()) {
                                *slot += g * v;
                            }
                        }
                    }
                    drop(vd);
                    mat.accumulate_grad(&dm);
                }
                if vec.requires_grad() {
                    // dv = M^T * g
                    let md = mat.data();
                    let mut dv = vec![0.0; k];
                    for i in 0..m {
                        let g = grad_out[i];
                        if g != 0.0 {
                            let row = &md[i * k..(i + 1) * k];
                            for (slot, &w) in dv.iter_mut().zip(row.iter()) {
                                *slot += g * w;
                            }
                        }
                    }
                    drop(md);
                    vec.accumulate_grad(&dv);
                }
            }
            Op::Sum(a) => {
                if a.requires_grad() {
                    let da = vec![grad_out[0]; a.numel()];
                    a.accumulate_grad(&da);
                }
            }
            Op::Reshape(a) => {
                if a.requires_grad() {
                    a.accumulate_grad(grad_out);
                }
            }
            Op::Slice {
                input,
                axis,
                start,
                len,
            } => {
                if input.requires_grad() {
                    let shape = input.shape();
                    let axis_len = shape[*axis];
                    let outer: usize = shape[..*axis].iter().product();
                    let inner: usize = shape[*axis + 1..].iter().product();
                    let mut da = vec![0.0; input.numel()];
                    for o in 0..outer {
                        for j in 0..*len {
                            let src = (o * len + j) * inner;
                            let dst = (o * axis_len + start + j) * inner;
                            da[dst..dst + inner].copy_from_slice(&grad_out[src..src + inner]);
                        }
                    }
                    input.accumulate_grad(&da);
                }
            }
            Op::Concat { inputs, axis } => {
                let out_shape = out.shape();
                let outer: usize = out_shape[..*axis].iter().product();
                let inner: usize = out_shape[*axis + 1..].iter().product();
                let out_axis: usize = out_shape[*axis];
                let mut offset = 0;
                for t in inputs {
                    let t_axis = t.shape()[*axis];
                    if t.requires_grad() {
                        let mut da = vec![0.0; t.numel()];
                        for o in 0..outer {
                            let src = (o * out_axis + offset) * inner;
                            let dst = o * t_axis * inner;
                            let count = t_axis * inner;
                            da[dst..dst + count].copy_from_slice(&grad_out[src..src + count]);
                        }
                        t.accumulate_grad(&da);
                    }
                    offset += t_axis;
                }
            }
            Op::Conv3d {
                input,
                weight,
                bias,
                pad,
            } => super::conv::conv3d_backward(grad_out, input, weight, bias, *pad, out.shape()),
            Op::MaxPoolH { input, argmax } => {
                if input.requires_grad() {
                    let mut da = vec![0.0; input.numel()];
                    for (out_idx, &in_idx) in argmax.iter().enumerate() {
                        da[in_idx] += grad_out[out_idx];
                    }
                    input.accumulate_grad(&da);
                }
            }
        }
    }
}

fn binary_shape_check(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        binary_shape_check("add", self, other)?;
        let data: Vec<Scalar> = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
        };
        let rg = self.requires_grad() || other.requires_grad();
        Ok(Tensor::make(
            data,
            self.shape().to_vec(),
            rg,
            Op::Add(self.clone(), other.clone()),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        binary_shape_check("sub", self, other)?;
        let data: Vec<Scalar> = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
        };
        let rg = self.requires_grad() || other.requires_grad();
        Ok(Tensor::make(
            data,
            self.shape().to_vec(),
            rg,
            Op::Sub(self.clone(), other.clone()),
        ))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        binary_shape_check("hadamard", self, other)?;
        let data: Vec<Scalar> = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(x, y)| x * y).collect()
        };
        let rg = self.requires_grad() || other.requires_grad();
        Ok(Tensor::make(
            data,
            self.shape().to_vec(),
            rg,
            Op::Mul(self.clone(), other.clone()),
        ))
    }

    /// Alias for [`Tensor::mul`], matching the usual name for `a ∘ b`.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.mul(other)
    }

    /// Multiply every element by a constant.
    pub fn scale(&self, c: Scalar) -> Tensor {
        let data: Vec<Scalar> = self.data().iter().map(|x| x * c).collect();
        Tensor::make(
            data,
            self.shape().to_vec(),
            self.requires_grad(),
            Op::Scale(self.clone(), c),
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        let data: Vec<Scalar> = self
            .data()
            .iter()
            .map(|&x| {
                // Split by sign so exp never overflows.
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            })
            .collect();
        Tensor::make(
            data,
            self.shape().to_vec(),
            self.requires_grad(),
            Op::Sigmoid(self.clone()),
        )
    }

    pub fn tanh(&self) -> Tensor {
        let data: Vec<Scalar> = self.data().iter().map(|x| x.tanh()).collect();
        Tensor::make(
            data,
            self.shape().to_vec(),
            self.requires_grad(),
            Op::Tanh(self.clone()),
        )
    }

    pub fn relu(&self) -> Result<Tensor> {
        let data: Vec<Scalar> = self.data().iter().map(|x| x.max(0.0)).collect();
        Ok(Tensor::make(
            data,
            self.shape().to_vec(),
            self.requires_grad(),
            Op::Relu(self.clone()),
        ))
    }

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape().len() != 2 || other.shape().len() != 2 || self.shape()[1] != other.shape()[0]
        {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let (m, k) = (self.shape()[0], self.shape()[1]);
        let n = other.shape()[1];
        let mut data = vec![0.0; m * n];
        {
            let a = self.data();
            let b = other.data();
            for i in 0..m {
                for p in 0..k {
                    let av = a[i * k + p];
                    if av != 0.0 {
                        let brow = &b[p * n..(p + 1) * n];
                        let crow = &mut data[i * n..(i + 1) * n];
                        for (c, &bv) in crow.iter_mut().zip(brow.iter()) {
                            *c += av * bv;
                        }
                    }
                }
            }
        }
        let rg = self.requires_grad() || other.requires_grad();
        Ok(Tensor::make(
            data,
            vec![m, n],
            rg,
            Op::MatMul(self.clone(), other.clone()),
        ))
    }

    /// `[m,k] x [k] -> [m]`.
    pub fn matvec(&self, vector: &Tensor) -> Result<Tensor> {
        if self.shape().len() != 2 || vector.shape().len() != 1 || self.shape()[1] != vector.shape()[0]
        {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: self.shape().to_vec(),
                rhs: vector.shape().to_vec(),
            });
        }
        let (m, k) = (self.shape()[0], self.shape()[1]);
        let mut data = vec![0.0; m];
        {
            let a = self.data();
            let v = vector.data();
            for i in 0..m {
                data[i] = super::dot(&a[i * k..(i + 1) * k], &v);
            }
        }
        let rg = self.requires_grad() || vector.requires_grad();
        Ok(Tensor::make(
            data,
            vec![m],
            rg,
            Op::MatVec(self.clone(), vector.clone()),
        ))
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum(&self) -> Result<Tensor> {
        let total: Scalar = self.data().iter().sum();
        Ok(Tensor::make(
            vec![total],
            vec![1],
            self.requires_grad(),
            Op::Sum(self.clone()),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() || shape.contains(&0) {
            return Err(Error::InvalidShape {
                op: "reshape",
                shape: shape.to_vec(),
                reason: format!("incompatible with {:?}", self.shape()),
            });
        }
        Ok(Tensor::make(
            self.to_vec(),
            shape.to_vec(),
            self.requires_grad(),
            Op::Reshape(self.clone()),
        ))
    }

    /// Contiguous sub-tensor of `len` entries starting at `start` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::InvalidShape {
                op: "slice",
                shape: shape.to_vec(),
                reason: format!("axis {axis}, start {start}, len {len}"),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let axis_len = shape[axis];
        let mut data = vec![0.0; outer * len * inner];
        {
            let src = self.data();
            for o in 0..outer {
                for j in 0..len {
                    let s = (o * axis_len + start + j) * inner;
                    let d = (o * len + j) * inner;
                    data[d..d + inner].copy_from_slice(&src[s..s + inner]);
                }
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        Ok(Tensor::make(
            data,
            out_shape,
            self.requires_grad(),
            Op::Slice {
                input: self.clone(),
                axis,
                start,
                len,
            },
        ))
    }

    /// Column `w` of a `[H, W]` tensor, as a length-`H` vector.
    pub fn column(&self, w: usize) -> Result<Tensor> {
        if self.shape().len() != 2 {
            return Err(Error::InvalidShape {
                op: "column",
                shape: self.shape().to_vec(),
                reason: "expected a 2-D tensor".into(),
            });
        }
        let h = self.shape()[0];
        self.slice(1, w, 1)?.reshape(&[h])
    }
}

/// Concatenate tensors along `axis`; all other extents must agree.
pub fn concat(tensors: &[Tensor], axis: usize) -> Result<Tensor> {
    let first = tensors.first().ok_or(Error::EmptyDataset)?;
    let base = first.shape().to_vec();
    if axis >= base.len() {
        return Err(Error::InvalidShape {
            op: "concat",
            shape: base,
            reason: format!("axis {axis} out of range"),
        });
    }
    let mut axis_total = 0;
    for t in tensors {
        let s = t.shape();
        let compatible = s.len() == base.len()
            && s.iter()
                .zip(base.iter())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !compatible {
            return Err(Error::ShapeMismatch {
                op: "concat",
                lhs: base.clone(),
                rhs: s.to_vec(),
            });
        }
        axis_total += s[axis];
    }
    let outer: usize = base[..axis].iter().product();
    let inner: usize = base[axis + 1..].iter().product();
    let mut out_shape = base.clone();
    out_shape[axis] = axis_total;
    let mut data = vec![0.0; outer * axis_total * inner];
    let mut offset = 0;
    for t in tensors {
        let t_axis = t.shape()[axis];
        let src = t.data();
        for o in 0..outer {
            let s = o * t_axis * inner;
            let d = (o * axis_total + offset) * inner;
            let count = t_axis * inner;
            data[d..d + count].copy_from_slice(&src[s..s + count]);
        }
        offset += t_axis;
    }
    let rg = tensors.iter().any(|t| t.requires_grad());
    Ok(Tensor::make(
        data,
        out_shape,
        rg,
        Op::Concat {
            inputs: tensors.to_vec(),
            axis,
        },
    ))
}
