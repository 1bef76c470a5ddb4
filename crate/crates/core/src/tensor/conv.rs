//! 3-D convolution and height-wise max pooling primitives.
//!
//! Layout conventions (row-major):
//!   input  `[C, D, H, W]`
//!   weight `[O, C, kD, kH, kW]`
//!   output `[O, D', H', W']` with stride 1 and zero padding.

use super::ops::Op;
use super::{dot, Scalar, Tensor};
use crate::error::{Error, Result};

/// Padding that preserves each spatial extent for odd kernel sizes.
pub fn same_padding(kernel: [usize; 3]) -> [usize; 3] {
    [
        (kernel[0] - 1) / 2,
        (kernel[1] - 1) / 2,
        (kernel[2] - 1) / 2,
    ]
}

struct ConvDims {
    chans: usize,
    d: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    kd: usize,
    kh: usize,
    kw: usize,
    od: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims(input: &Tensor, weight: &Tensor, bias: &Tensor, pad: [usize; 3]) -> Result<ConvDims> {
    let is = input.shape();
    let ws = weight.shape();
    if is.len() != 4 || ws.len() != 5 {
        return Err(Error::ShapeMismatch {
            op: "conv3d",
            lhs: is.to_vec(),
            rhs: ws.to_vec(),
        });
    }
    let (chans, d, h, w) = (is[0], is[1], is[2], is[3]);
    let (out_ch, wc, kd, kh, kw) = (ws[0], ws[1], ws[2], ws[3], ws[4]);
    if wc != chans {
        return Err(Error::ChannelMismatch {
            input: chans,
            expected: wc,
        });
    }
    if bias.shape() != [out_ch] {
        return Err(Error::ShapeMismatch {
            op: "conv3d bias",
            lhs: bias.shape().to_vec(),
            rhs: vec![out_ch],
        });
    }
    let (pd, ph, pw) = (pad[0], pad[1], pad[2]);
    if d + 2 * pd < kd || h + 2 * ph < kh || w + 2 * pw < kw {
        return Err(Error::InvalidShape {
            op: "conv3d",
            shape: is.to_vec(),
            reason: format!("input smaller than kernel {kd}x{kh}x{kw} after padding {pad:?}"),
        });
    }
    Ok(ConvDims {
        chans,
        d,
        h,
        w,
        out_ch,
        kd,
        kh,
        kw,
        od: d + 2 * pd - kd + 1,
        oh: h + 2 * ph - kh + 1,
        ow: w + 2 * pw - kw + 1,
    })
}

impl Tensor {
    /// Cross-correlation of a `[C,D,H,W]` input with `[O,C,kD,kH,kW]` kernels,
    /// stride 1, zero padding `pad = [pD,pH,pW]`, plus a per-channel bias.
    pub fn conv3d(&self, weight: &Tensor, bias: &Tensor, pad: [usize; 3]) -> Result<Tensor> {
        let dm = conv_dims(self, weight, bias, pad)?;
        let mut out = vec![0.0; dm.out_ch * dm.od * dm.oh * dm.ow];
        {
            let inp = self.data();
            let wt = weight.data();
            let bs = bias.data();
            for o in 0..dm.out_ch {
                for od in 0..dm.od {
                    for oh in 0..dm.oh {
                        let out_base = ((o * dm.od + od) * dm.oh + oh) * dm.ow;
                        let out_row = &mut out[out_base..out_base + dm.ow];
                        out_row.fill(bs[o]);
                        for c in 0..dm.chans {
                            for a in 0..dm.kd {
                                let id = (od + a) as isize - pad[0] as isize;
                                if id < 0 || id >= dm.d as isize {
                                    continue;
                                }
                                for b in 0..dm.kh {
                                    let ih = (oh + b) as isize - pad[1] as isize;
                                    if ih < 0 || ih >= dm.h as isize {
                                        continue;
                                    }
                                    let in_base =
                                        ((c * dm.d + id as usize) * dm.h + ih as usize) * dm.w;
                                    let in_row = &inp[in_base..in_base + dm.w];
                                    let w_base =
                                        (((o * dm.chans + c) * dm.kd + a) * dm.kh + b) * dm.kw;
                                    let w_row = &wt[w_base..w_base + dm.kw];
                                    for (q, &wq) in w_row.iter().enumerate() {
                                        // valid ow range: 0 <= ow + q - pW < W
                                        let lo = pad[2].saturating_sub(q);
                                        let hi = (dm.w + pad[2] - q).min(dm.ow);
                                        if lo >= hi {
                                            continue;
                                        }
                                        let src = lo + q - pad[2];
                                        let n = hi - lo;
                                        for (dst, &x) in out_row[lo..hi]
                                            .iter_mut()
                                            .zip(&in_row[src..src + n])
                                        {
                                            *dst += wq * x;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let rg = self.requires_grad() || weight.requires_grad() || bias.requires_grad();
        Ok(Tensor::make(
            out,
            vec![dm.out_ch, dm.od, dm.oh, dm.ow],
            rg,
            Op::Conv3d {
                input: self.clone(),
                weight: weight.clone(),
                bias: bias.clone(),
                pad,
            },
        ))
    }

    /// Max pooling over the height dimension only: kernel and stride 2,
    /// depth and width untouched, output height `floor(H / 2)`.
    pub fn maxpool_height(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 4 {
            return Err(Error::InvalidShape {
                op: "maxpool3d",
                shape: s.to_vec(),
                reason: "expected [C,D,H,W]".into(),
            });
        }
        let (c, d, h, w) = (s[0], s[1], s[2], s[3]);
        if h < 2 {
            return Err(Error::PoolHeightTooSmall { height: h });
        }
        let oh = h / 2;
        let mut out = vec![0.0; c * d * oh * w];
        let mut argmax = vec![0usize; out.len()];
        {
            let inp = self.data();
            for ci in 0..c {
                for di in 0..d {
                    for hi in 0..oh {
                        let top = ((ci * d + di) * h + 2 * hi) * w;
                        let bot = top + w;
                        let out_base = ((ci * d + di) * oh + hi) * w;
                        for wi in 0..w {
                            let (a, b) = (inp[top + wi], inp[bot + wi]);
                            // Ties go to the first (lowest-index) element.
                            if b > a {
                                out[out_base + wi] = b;
                                argmax[out_base + wi] = bot + wi;
                            } else {
                                out[out_base + wi] = a;
                                argmax[out_base + wi] = top + wi;
                            }
                        }
                    }
                }
            }
        }
        Ok(Tensor::make(
            out,
            vec![c, d, oh, w],
            self.requires_grad(),
            Op::MaxPoolH {
                input: self.clone(),
                argmax,
            },
        ))
    }
}

#[allow(clippy::needless_range_loop)] // o indexes weights, bias and output together
pub(crate) fn conv3d_backward(
    grad_out: &[Scalar],
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    pad: [usize; 3],
    out_shape: &[usize],
) {
    let dm = conv_dims(input, weight, bias, pad).expect("conv3d backward on validated op");
    debug_assert_eq!(out_shape, [dm.out_ch, dm.od, dm.oh, dm.ow]);

    let need_input = input.requires_grad();
    let need_weight = weight.requires_grad();
    let need_bias = bias.requires_grad();

    let mut d_input = if need_input {
        vec![0.0; input.numel()]
    } else {
        Vec::new()
    };
    let mut d_weight = if need_weight {
        vec![0.0; weight.numel()]
    } else {
        Vec::new()
    };
    let mut d_bias = if need_bias {
        vec![0.0; bias.numel()]
    } else {
        Vec::new()
    };

    {
        let inp = input.data();
        let wt = weight.data();
        for o in 0..dm.out_ch {
            for od in 0..dm.od {
                for oh in 0..dm.oh {
                    let g_base = ((o * dm.od + od) * dm.oh + oh) * dm.ow;
                    let g_row = &grad_out[g_base..g_base + dm.ow];
                    if need_bias {
                        d_bias[o] += g_row.iter().sum::<Scalar>();
                    }
                    if !need_input && !need_weight {
                        continue;
                    }
                    for c in 0..dm.chans {
                        for a in 0..dm.kd {
                            let id = (od + a) as isize - pad[0] as isize;
                            if id < 0 || id >= dm.d as isize {
                                continue;
                            }
                            for b in 0..dm.kh {
                                let ih = (oh + b) as isize - pad[1] as isize;
                                if ih < 0 || ih >= dm.h as isize {
                                    continue;
                                }
                                let in_base =
                                    ((c * dm.d + id as usize) * dm.h + ih as usize) * dm.w;
                                let w_base =
                                    (((o * dm.chans + c) * dm.kd + a) * dm.kh + b) * dm.kw;
                                for q in 0..dm.kw {
                                    let lo = pad[2].saturating_sub(q);
                                    let hi = (dm.w + pad[2] - q).min(dm.ow);
                                    if lo >= hi {
                                        continue;
                                    }
                                    let src = lo + q - pad[2];
                                    let n = hi - lo;
                                    if need_weight {
                                        let in_row = &inp[in_base + src..in_base + src + n];
                                        d_weight[w_base + q] += dot(in_row, &g_row[lo..hi]);
                                    }
                                    if need_input {
                                        let wq = wt[w_base + q];
                                        if wq != 0.0 {
                                            let din_row = &mut d_input
                                                [in_base + src..in_base + src + n];
                                            for (dst, &g) in
                                                din_row.iter_mut().zip(&g_row[lo..hi])
                                            {
                                                *dst += wq * g;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if need_input {
        input.accumulate_grad(&d_input);
    }
    if need_weight {
        weight.accumulate_grad(&d_weight);
    }
    if need_bias {
        bias.accumulate_grad(&d_bias);
    }
}
