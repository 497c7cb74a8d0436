//! Same-size 3x3x3 convolution (stride 1, zero padding 1).
//!
//! The raw kernels operate on flat channel-major buffers so the autodiff
//! tape can reuse them for forward and both backward products.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{Dims, RealTensor4};
use crate::Real;

/// Number of taps in a 3x3x3 kernel.
pub const TAPS: usize = 27;

/// Weights `(c_out, c_in, 3, 3, 3)` plus one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvKernel {
    pub c_out: usize,
    pub c_in: usize,
    pub weight: Vec<Real>,
    pub bias: Vec<Real>,
}

impl ConvKernel {
    pub fn zeros(c_out: usize, c_in: usize) -> Self {
        Self { c_out, c_in, weight: alloc::vec![0.0; c_out * c_in * TAPS], bias: alloc::vec![0.0; c_out] }
    }

    pub fn new(c_out: usize, c_in: usize, weight: Vec<Real>, bias: Vec<Real>) -> Result<Self> {
        if weight.len() != c_out * c_in * TAPS || bias.len() != c_out {
            bail!(
                Argument,
                "kernel ({c_out}, {c_in}) needs {} weights and {c_out} biases, got {} and {}",
                c_out * c_in * TAPS,
                weight.len(),
                bias.len()
            );
        }
        Ok(Self { c_out, c_in, weight, bias })
    }

    /// Flat index of tap `(a, b, c)`, each in `0..3`, for channel pair `(o, i)`.
    #[inline]
    pub fn index(&self, o: usize, i: usize, a: usize, b: usize, c: usize) -> usize {
        (o * self.c_in + i) * TAPS + a * 9 + b * 3 + c
    }
}

/// `out[z] += w * inp[z + dz]` over the valid range.
#[inline(always)]
fn axpy_shift(out: &mut [Real], inp: &[Real], w: Real, dz: isize) {
    let n = out.len();
    match dz {
        -1 => out[1..].iter_mut().zip(&inp[..n - 1]).for_each(|(o, &v)| *o += w * v),
        0 => out.iter_mut().zip(inp).for_each(|(o, &v)| *o += w * v),
        _ => out[..n - 1].iter_mut().zip(&inp[1..]).for_each(|(o, &v)| *o += w * v),
    }
}

/// `Σ_z a[z] * b[z + dz]` over the valid range.
#[inline(always)]
fn dot_shift(a: &[Real], b: &[Real], dz: isize) -> Real {
    let n = a.len();
    match dz {
        -1 => a[1..].iter().zip(&b[..n - 1]).map(|(x, y)| x * y).sum(),
        0 => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        _ => a[..n - 1].iter().zip(&b[1..]).map(|(x, y)| x * y).sum(),
    }
}

#[inline(always)]
fn valid(pos: usize, d: isize, n: usize) -> Option<usize> {
    let p = pos as isize + d;
    (p >= 0 && (p as usize) < n).then_some(p as usize)
}

/// Forward product: `out = conv(input) + bias`, overwriting `out`.
pub fn forward_raw(input: &[Real], dims: Dims, k: &ConvKernel, out: &mut [Real]) {
    let n = dims.len();
    let (ny, nz) = (dims.ny, dims.nz);
    debug_assert_eq!(input.len(), k.c_in * n);
    debug_assert_eq!(out.len(), k.c_out * n);
    for o in 0..k.c_out {
        let out_c = &mut out[o * n..(o + 1) * n];
        out_c.iter_mut().for_each(|v| *v = k.bias[o]);
        for x in 0..dims.nx {
            for y in 0..ny {
                let row = &mut out_c[(x * ny + y) * nz..(x * ny + y + 1) * nz];
                for i in 0..k.c_in {
                    let in_c = &input[i * n..(i + 1) * n];
                    for a in 0..3 {
                        let Some(xs) = valid(x, a as isize - 1, dims.nx) else { continue };
                        for b in 0..3 {
                            let Some(ys) = valid(y, b as isize - 1, ny) else { continue };
                            let src = &in_c[(xs * ny + ys) * nz..(xs * ny + ys + 1) * nz];
                            let base = k.index(o, i, a, b, 0);
                            for c in 0..3 {
                                axpy_shift(row, src, k.weight[base + c], c as isize - 1);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulate `grad_in += convᵀ(grad_out)`.
pub fn backward_input_raw(grad_out: &[Real], dims: Dims, k: &ConvKernel, grad_in: &mut [Real]) {
    let n = dims.len();
    let (ny, nz) = (dims.ny, dims.nz);
    for i in 0..k.c_in {
        let gin_c = &mut grad_in[i * n..(i + 1) * n];
        for x in 0..dims.nx {
            for y in 0..ny {
                let row = &mut gin_c[(x * ny + y) * nz..(x * ny + y + 1) * nz];
                for o in 0..k.c_out {
                    let gout_c = &grad_out[o * n..(o + 1) * n];
                    for a in 0..3 {
                        let Some(xs) = valid(x, 1 - a as isize, dims.nx) else { continue };
                        for b in 0..3 {
                            let Some(ys) = valid(y, 1 - b as isize, ny) else { continue };
                            let src = &gout_c[(xs * ny + ys) * nz..(xs * ny + ys + 1) * nz];
                            let base = k.index(o, i, a, b, 0);
                            for c in 0..3 {
                                axpy_shift(row, src, k.weight[base + c], 1 - c as isize);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulate weight and bias gradients of the forward product.
pub fn backward_params_raw(
    input: &[Real],
    grad_out: &[Real],
    dims: Dims,
    k: &ConvKernel,
    grad_w: &mut [Real],
    grad_b: &mut [Real],
) {
    let n = dims.len();
    let (ny, nz) = (dims.ny, dims.nz);
    for o in 0..k.c_out {
        let gout_c = &grad_out[o * n..(o + 1) * n];
        grad_b[o] += gout_c.iter().sum::<Real>();
        for i in 0..k.c_in {
            let in_c = &input[i * n..(i + 1) * n];
            let mut acc = [0.0 as Real; TAPS];
            for x in 0..dims.nx {
                for y in 0..ny {
                    let g = &gout_c[(x * ny + y) * nz..(x * ny + y + 1) * nz];
                    for a in 0..3 {
                        let Some(xs) = valid(x, a as isize - 1, dims.nx) else { continue };
                        for b in 0..3 {
                            let Some(ys) = valid(y, b as isize - 1, ny) else { continue };
                            let src = &in_c[(xs * ny + ys) * nz..(xs * ny + ys + 1) * nz];
                            for c in 0..3 {
                                acc[a * 9 + b * 3 + c] += dot_shift(g, src, c as isize - 1);
                            }
                        }
                    }
                }
            }
            let base = k.index(o, i, 0, 0, 0);
            for (t, v) in acc.iter().enumerate() {
                grad_w[base + t] += v;
            }
        }
    }
}

/// Same-size 3D convolution of a multi-channel tensor.
pub fn conv3d(input: &RealTensor4, kernel: &ConvKernel) -> Result<RealTensor4> {
    if input.channels() != kernel.c_in {
        bail!(Argument, "input has {} channels, kernel expects {}", input.channels(), kernel.c_in);
    }
    let dims = input.dims().validate()?;
    let mut out = RealTensor4::zeros(kernel.c_out, dims);
    forward_raw(input.data(), dims, kernel, out.data_mut());
    Ok(out)
}
