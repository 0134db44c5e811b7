//! 2-d cross-correlation with zero padding, and its input vector-Jacobian product.
//!
//! Both kernels parallelize over whole channel planes. Every output element is
//! accumulated by exactly one task in a fixed order, so results do not depend on
//! the number of threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output extent of a strided, padded window scan along one axis.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Shape("stride must be at least 1".into()));
    }
    let padded = input + 2 * pad;
    if kernel == 0 || kernel > padded {
        return Err(Error::Shape(format!(
            "kernel extent {kernel} does not fit padded input extent {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

struct Geometry {
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    out_h: usize,
    out_w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn new(input_dims: &[usize], weights: &Tensor, stride: usize, pad: usize) -> Result<Self> {
        let [in_c, in_h, in_w] = input_dims[..] else {
            return Err(Error::Shape(format!(
                "convolution input must be c × h × w, got {input_dims:?}"
            )));
        };
        let [out_c, w_in, kh, kw] = weights.dims()[..] else {
            return Err(Error::Shape(format!(
                "convolution weights must be out × in × kh × kw, got {:?}",
                weights.dims()
            )));
        };
        if w_in != in_c {
            return Err(Error::Shape(format!(
                "weights expect {w_in} input channels, input has {in_c}"
            )));
        }
        let out_h = conv_out_extent(in_h, kh, stride, pad)?;
        let out_w = conv_out_extent(in_w, kw, stride, pad)?;
        Ok(Self {
            in_c,
            in_h,
            in_w,
            out_c,
            out_h,
            out_w,
            kh,
            kw,
            stride,
            pad,
        })
    }

    /// Output indices `o` whose source index `o * stride + k - pad` lies in `0..input`.
    fn valid_range(&self, k: usize, input: usize, output: usize) -> std::ops::Range<usize> {
        let (s, p) = (self.stride, self.pad);
        let lo = if p > k { (p - k).div_ceil(s) } else { 0 };
        if input + p <= k {
            return 0..0;
        }
        let hi = ((input - 1 + p - k) / s + 1).min(output);
        lo..hi.max(lo)
    }
}

/// Cross-correlates `input` (c × h × w) with `weights` (out × c × kh × kw) and adds `bias`.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = Geometry::new(input.dims(), weights, stride, pad)?;
    if bias.len() != g.out_c {
        return Err(Error::Shape(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            g.out_c
        )));
    }
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    let mut out = vec![0.0; g.out_c * out_plane];
    let x = input.data();
    let w = weights.data();

    out.par_chunks_mut(out_plane)
        .enumerate()
        .for_each(|(oc, plane)| {
            plane.fill(bias[oc]);
            for ic in 0..g.in_c {
                let src = &x[ic * in_plane..(ic + 1) * in_plane];
                for ky in 0..g.kh {
                    let rows = g.valid_range(ky, g.in_h, g.out_h);
                    for kx in 0..g.kw {
                        let wv = w[((oc * g.in_c + ic) * g.kh + ky) * g.kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let cols = g.valid_range(kx, g.in_w, g.out_w);
                        for oy in rows.clone() {
                            let iy = oy * g.stride + ky - g.pad;
                            let src_row = &src[iy * g.in_w..(iy + 1) * g.in_w];
                            let dst_row = &mut plane[oy * g.out_w..(oy + 1) * g.out_w];
                            for ox in cols.clone() {
                                dst_row[ox] += wv * src_row[ox * g.stride + kx - g.pad];
                            }
                        }
                    }
                }
            }
        });

    Tensor::new(vec![g.out_c, g.out_h, g.out_w], out)
}

/// Gradient of `⟨cotangent, conv(input)⟩` with respect to `input`: the transposed
/// convolution of `cotangent` with `weights`.
pub fn conv2d_vjp_input(
    cotangent: &Tensor,
    weights: &Tensor,
    stride: usize,
    pad: usize,
    input_dims: &[usize],
) -> Result<Tensor> {
    let g = Geometry::new(input_dims, weights, stride, pad)?;
    let expected = [g.out_c, g.out_h, g.out_w];
    if cotangent.dims() != expected {
        return Err(Error::Shape(format!(
            "cotangent dims {:?} do not match forward output {:?}",
            cotangent.dims(),
            expected
        )));
    }
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    let mut grad = vec![0.0; g.in_c * in_plane];
    let gy = cotangent.data();
    let w = weights.data();

    grad.par_chunks_mut(in_plane)
        .enumerate()
        .for_each(|(ic, plane)| {
            for oc in 0..g.out_c {
                let src = &gy[oc * out_plane..(oc + 1) * out_plane];
                for ky in 0..g.kh {
                    let rows = g.valid_range(ky, g.in_h, g.out_h);
                    for kx in 0..g.kw {
                        let wv = w[((oc * g.in_c + ic) * g.kh + ky) * g.kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let cols = g.valid_range(kx, g.in_w, g.out_w);
                        for oy in rows.clone() {
                            let iy = oy * g.stride + ky - g.pad;
                            let src_row = &src[oy * g.out_w..(oy + 1) * g.out_w];
                            let dst_row = &mut plane[iy * g.in_w..(iy + 1) * g.in_w];
                            for ox in cols.clone() {
                                dst_row[ox * g.stride + kx - g.pad] += wv * src_row[ox];
                            }
                        }
                    }
                }
            }
        });

    Tensor::new(input_dims.to_vec(), grad)
}
