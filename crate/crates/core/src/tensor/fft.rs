//! Centered, unitary discrete Fourier transforms.
//!
//! Every transform in the crate uses the "shifted" convention: the zero
//! frequency sits at index `n / 2` on each axis in both domains, and the
//! transform is scaled by `1/sqrt(n)` so forward and inverse are adjoint.
//!
//! The 1D engine is a mixed-radix decimation-in-time Cooley-Tukey with
//! dedicated radix-2/4 butterflies and a generic butterfly for other prime
//! factors, so any length is supported.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::prelude::*;

use crate::error::{bail, Result};
use crate::tensor::{ComplexVolume, Dims};

/// Precomputed factorization and twiddles for one transform length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    factors: Vec<usize>,
    twiddles: Vec<Cplx>,
    max_factor: usize,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while n % 4 == 0 {
        out.push(4);
        n /= 4;
    }
    for p in [2usize, 3, 5] {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
    }
    let mut p = 7;
    while n > 1 {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 2;
    }
    out
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let tau = 2.0 * core::f64::consts::PI;
        let twiddles = (0..n)
            .map(|k| {
                let a = -tau * (k as f64) / (n as f64);
                Cplx::new(Float::cos(a) as Real, Float::sin(a) as Real)
            })
            .collect();
        let factors = factorize(n);
        let max_factor = factors.iter().copied().max().unwrap_or(1);
        Self { n, factors, twiddles, max_factor }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized DFT of `input` into `output` (`exp(+i..)` kernel when
    /// `inverse`).
    pub fn process(&self, input: &[Cplx], output: &mut [Cplx], inverse: bool, scratch: &mut Vec<Cplx>) {
        debug_assert_eq!(input.len(), self.n);
        debug_assert_eq!(output.len(), self.n);
        scratch.resize(2 * self.max_factor, Cplx::zero());
        self.recurse(input, 1, output, &self.factors, 1, inverse, scratch);
    }

    #[inline]
    fn tw(&self, idx: usize, inverse: bool) -> Cplx {
        let w = self.twiddles[idx];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        input: &[Cplx],
        stride: usize,
        out: &mut [Cplx],
        factors: &[usize],
        tw_stride: usize,
        inverse: bool,
        scratch: &mut [Cplx],
    ) {
        let len = out.len();
        if len == 1 {
            out[0] = input[0];
            return;
        }
        let p = factors[0];
        let m = len / p;
        for r in 0..p {
            self.recurse(
                &input[r * stride..],
                stride * p,
                &mut out[r * m..(r + 1) * m],
                &factors[1..],
                tw_stride * p,
                inverse,
                scratch,
            );
        }
        let n = self.n;
        match p {
            2 => {
                for k in 0..m {
                    let a = out[k];
                    let b = out[k + m] * self.tw(k * tw_stride, inverse);
                    out[k] = a + b;
                    out[k + m] = a - b;
                }
            }
            4 => {
                for k in 0..m {
                    let t0 = out[k];
                    let t1 = out[k + m] * self.tw(k * tw_stride, inverse);
                    let t2 = out[k + 2 * m] * self.tw(2 * k * tw_stride, inverse);
                    let t3 = out[k + 3 * m] * self.tw(3 * k * tw_stride, inverse);
                    let s02 = t0 + t2;
                    let d02 = t0 - t2;
                    let s13 = t1 + t3;
                    let d13 = t1 - t3;
                    // forward: multiply by -i; inverse: by +i
                    let rot = if inverse { Cplx::new(-d13.im, d13.re) } else { Cplx::new(d13.im, -d13.re) };
                    out[k] = s02 + s13;
                    out[k + m] = d02 + rot;
                    out[k + 2 * m] = s02 - s13;
                    out[k + 3 * m] = d02 - rot;
                }
            }
            _ => {
                let (t, _) = scratch.split_at_mut(p);
                let root_step = n / p;
                for k in 0..m {
                    for (r, tr) in t.iter_mut().enumerate() {
                        *tr = out[r * m + k] * self.tw((r * k * tw_stride) % n, inverse);
                    }
                    for q in 0..p {
                        let mut acc = Cplx::zero();
                        for (r, tr) in t.iter().enumerate() {
                            acc += *tr * self.tw(((r * q) % p) * root_step, inverse);
                        }
                        out[k + q * m] = acc;
                    }
                }
            }
        }
    }
}

/// Plans for the three axes of a fixed volume shape.
#[derive(Clone, Debug)]
pub struct Fft3 {
    dims: Dims,
    plans: [FftPlan; 3],
}

impl Fft3 {
    pub fn new(dims: Dims) -> Result<Self> {
        let dims = dims.validate()?;
        Ok(Self {
            dims,
            plans: [FftPlan::new(dims.nx), FftPlan::new(dims.ny), FftPlan::new(dims.nz)],
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Centered unitary transform along one axis, in place.
    pub fn transform_axis(&self, v: &mut ComplexVolume, axis: usize, inverse: bool) {
        debug_assert_eq!(v.dims(), self.dims);
        let plan = &self.plans[axis];
        let n = plan.len();
        if n == 1 {
            return;
        }
        let d = self.dims;
        let stride = d.stride(axis);
        let half = n / 2;
        let scale = 1.0 / (n as Real).sqrt();
        let mut line = vec![Cplx::zero(); n];
        let mut spec = vec![Cplx::zero(); n];
        let mut scratch = Vec::new();
        let data = v.data_mut();
        let mut run = |base: usize| {
            for (j, l) in line.iter_mut().enumerate() {
                *l = data[base + ((j + half) % n) * stride];
            }
            plan.process(&line, &mut spec, inverse, &mut scratch);
            for k in 0..n {
                data[base + k * stride] = spec[(k + n - half) % n] * scale;
            }
        };
        match axis {
            0 => (0..d.ny * d.nz).for_each(&mut run),
            1 => {
                for x in 0..d.nx {
                    for z in 0..d.nz {
                        run(x * d.ny * d.nz + z);
                    }
                }
            }
            _ => (0..d.nx * d.ny).for_each(|b| run(b * d.nz)),
        }
    }

    pub fn forward(&self, v: &mut ComplexVolume) {
        for axis in 0..3 {
            self.transform_axis(v, axis, false);
        }
    }

    pub fn inverse(&self, v: &mut ComplexVolume) {
        for axis in 0..3 {
            self.transform_axis(v, axis, true);
        }
    }
}

/// Centered unitary 3D DFT.
pub fn fft3_centered(v: &ComplexVolume) -> Result<ComplexVolume> {
    let plan = Fft3::new(v.dims())?;
    let mut out = v.clone();
    plan.forward(&mut out);
    Ok(out)
}

/// Inverse of [`fft3_centered`].
pub fn ifft3_centered(v: &ComplexVolume) -> Result<ComplexVolume> {
    let plan = Fft3::new(v.dims())?;
    let mut out = v.clone();
    plan.inverse(&mut out);
    Ok(out)
}

fn axis_transform(v: &ComplexVolume, axis: usize, inverse: bool) -> Result<ComplexVolume> {
    if axis > 2 {
        bail!(Argument, "axis {axis} out of range for a 3D volume");
    }
    let plan = Fft3::new(v.dims())?;
    let mut out = v.clone();
    plan.transform_axis(&mut out, axis, inverse);
    Ok(out)
}

/// Centered unitary 1D DFT along `axis` only.
pub fn fft_axis(v: &ComplexVolume, axis: usize) -> Result<ComplexVolume> {
    axis_transform(v, axis, false)
}

/// Centered unitary 1D inverse DFT along `axis` only.
pub fn ifft_axis(v: &ComplexVolume, axis: usize) -> Result<ComplexVolume> {
    axis_transform(v, axis, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng;

    fn random_volume(dims: Dims, seed: u64) -> ComplexVolume {
        let mut rng = seeded_rng(seed);
        ComplexVolume::from_fn(dims, |_, _, _| Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    /// Direct O(n^2) centered DFT along every axis.
    fn naive_dft3(v: &ComplexVolume, sign: Real) -> ComplexVolume {
        let d = v.dims();
        let n = d.as_array();
        let mut cur = v.clone();
        for axis in 0..3 {
            let len = n[axis];
            let c = (len / 2) as i64;
            let mut next = ComplexVolume::zeros(d);
            for i in 0..d.len() {
                let (x, y, z) = d.coords(i);
                let mut coord = [x, y, z];
                let k = coord[axis] as i64 - c;
                let mut acc = Cplx::zero();
                for j in 0..len {
                    coord[axis] = j;
                    let jj = j as i64 - c;
                    let ang = sign * 2.0 * core::f64::consts::PI as Real * (k * jj) as Real / len as Real;
                    acc += cur.get(coord[0], coord[1], coord[2]) * Cplx::new(ang.cos(), ang.sin());
                }
                next.data_mut()[i] = acc / (len as Real).sqrt();
            }
            cur = next;
        }
        cur
    }

    fn rel_err(a: &ComplexVolume, b: &ComplexVolume) -> Real {
        a.sub(b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn centered_impulse_gives_flat_spectrum() {
        let d = Dims::new(8, 8, 8);
        let mut v = ComplexVolume::zeros(d);
        v.set(4, 4, 4, Cplx::new(1.0, 0.0));
        let f = fft3_centered(&v).unwrap();
        let expected = 1.0 / (512.0 as Real).sqrt();
        for c in f.data() {
            assert!((c.re - expected).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
        let back = ifft3_centered(&f).unwrap();
        assert!(rel_err(&back, &v) < 1e-12);
    }

    #[test]
    fn flat_volume_inverts_to_center_impulse() {
        let d = Dims::new(8, 8, 8);
        let v = ComplexVolume::filled(d, Cplx::new(1.0 / (512.0 as Real).sqrt(), 0.0));
        let img = ifft3_centered(&v).unwrap();
        for i in 0..d.len() {
            let expected = if d.coords(i) == (4, 4, 4) { 1.0 } else { 0.0 };
            assert!((img.data()[i] - Cplx::new(expected, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let z = ComplexVolume::zeros(Dims::new(3, 5, 4));
        assert_eq!(fft3_centered(&z).unwrap(), z);
        assert_eq!(ifft3_centered(&z).unwrap(), z);
        assert_eq!(ifft_axis(&z, 2).unwrap(), z);
    }

    #[test]
    fn matches_direct_summation_for_mixed_radix_lengths() {
        for (i, dims) in [Dims::new(4, 4, 4), Dims::new(6, 5, 7), Dims::new(12, 9, 1), Dims::new(8, 11, 10)]
            .into_iter()
            .enumerate()
        {
            let v = random_volume(dims, i as u64);
            let fast = fft3_centered(&v).unwrap();
            let slow = naive_dft3(&v, -1.0);
            assert!(rel_err(&fast, &slow) < 1e-10, "{dims}");
            let fast_inv = ifft3_centered(&v).unwrap();
            let slow_inv = naive_dft3(&v, 1.0);
            assert!(rel_err(&fast_inv, &slow_inv) < 1e-10, "{dims}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let v = random_volume(Dims::new(4, 4, 4), 11);
        let f = fft3_centered(&v).unwrap();
        assert!(((f.norm() - v.norm()) / v.norm()).abs() < 1e-6);
        assert!(rel_err(&ifft3_centered(&f).unwrap(), &v) < 1e-6);
    }

    #[test]
    fn axis_transforms_are_unitary_inverses() {
        let v = random_volume(Dims::new(4, 4, 4), 5);
        for axis in 0..3 {
            let f = fft_axis(&v, axis).unwrap();
            assert!(rel_err(&ifft_axis(&f, axis).unwrap(), &v) < 1e-6);
            let g = ifft_axis(&v, axis).unwrap();
            assert!(((g.norm() - v.norm()) / v.norm()).abs() < 1e-6);
        }
        assert!(matches!(ifft_axis(&v, 3), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn oversized_dims_are_rejected() {
        assert!(matches!(Dims::checked(1 << 20, 1 << 20, 4), Err(crate::Error::Sizing(_))));
    }
}
