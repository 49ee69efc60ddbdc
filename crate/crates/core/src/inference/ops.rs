//! Forward operators on `[C, H, W]` tensors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output extent of a sliding window, or `None` if the window does not fit.
pub fn window_output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// 2-D cross-correlation with zero padding.
///
/// `weight` is `[out_c, in_c, kh, kw]`. Every output element is accumulated
/// in the fixed order `(in_c, ky, kx)` before the bias is added, so results
/// do not depend on how output channels are scheduled across threads.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (in_c, in_h, in_w) = input.dims3()?;
    let (out_c, w_in_c, kh, kw) = match weight.shape() {
        &[o, i, kh, kw] => (o, i, kh, kw),
        s => {
            return Err(Error::Shape(format!(
                "conv weight must be [out_c, in_c, kh, kw], got {s:?}"
            )))
        }
    };
    if w_in_c != in_c {
        return Err(Error::Shape(format!(
            "conv expects {w_in_c} input channels, got {in_c}"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("conv stride must be at least 1".into()));
    }
    if let Some(b) = bias {
        if b.len() != out_c {
            return Err(Error::Shape(format!(
                "conv bias has {} entries for {out_c} output channels",
                b.len()
            )));
        }
    }
    let (out_h, out_w) = match (
        window_output_dim(in_h, kh, stride, padding),
        window_output_dim(in_w, kw, stride, padding),
    ) {
        (Some(h), Some(w)) => (h, w),
        _ => {
            return Err(Error::Shape(format!(
                "conv kernel {kh}x{kw} is larger than padded input {}x{}",
                in_h + 2 * padding,
                in_w + 2 * padding
            )))
        }
    };

    let pad_h = in_h + 2 * padding;
    let pad_w = in_w + 2 * padding;
    let padded = if padding == 0 {
        input.data().to_vec()
    } else {
        let mut buf = vec![0.0f32; in_c * pad_h * pad_w];
        for c in 0..in_c {
            for y in 0..in_h {
                let src = &input.data()[(c * in_h + y) * in_w..][..in_w];
                let dst = (c * pad_h + y + padding) * pad_w + padding;
                buf[dst..dst + in_w].copy_from_slice(src);
            }
        }
        buf
    };

    let plane = out_h * out_w;
    let kernel_len = in_c * kh * kw;
    let wdata = weight.data();
    let mut out = vec![0.0f32; out_c * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(oc, acc)| {
        let kernel = &wdata[oc * kernel_len..(oc + 1) * kernel_len];
        for c in 0..in_c {
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kernel[(c * kh + ky) * kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..out_h {
                        let row = (c * pad_h + oy * stride + ky) * pad_w + kx;
                        let dst = &mut acc[oy * out_w..(oy + 1) * out_w];
                        if stride == 1 {
                            for (d, s) in dst.iter_mut().zip(&padded[row..row + out_w]) {
                                *d += wv * s;
                            }
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                *d += wv * padded[row + ox * stride];
                            }
                        }
                    }
                }
            }
        }
        if let Some(b) = bias {
            let bv = b[oc];
            acc.iter_mut().for_each(|v| *v += bv);
        }
    });
    Tensor::from_parts(vec![out_c, out_h, out_w], out, "conv2d")
}

pub fn relu(input: &Tensor) -> Result<Tensor> {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_parts(input.shape().to_vec(), data, "relu")
}

/// Window max with floor output sizing and no padding.
pub fn maxpool(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    if kernel == 0 || stride == 0 {
        return Err(Error::Shape("maxpool kernel and stride must be at least 1".into()));
    }
    let (out_h, out_w) = match (
        window_output_dim(h, kernel, stride, 0),
        window_output_dim(w, kernel, stride, 0),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::Shape(format!(
                "maxpool window {kernel}x{kernel} is larger than input {h}x{w}"
            )))
        }
    };
    let data = input.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..kernel {
                    let row = (ch * h + oy * stride + ky) * w + ox * stride;
                    for &v in &data[row..row + kernel] {
                        m = m.max(v);
                    }
                }
                out.push(m);
            }
        }
    }
    Tensor::from_parts(vec![c, out_h, out_w], out, "maxpool")
}
