use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Zero;

use crate::prelude::*;

use crate::error::{bail, Result};

/// Upper bound on the number of voxels in a single volume.
pub const MAX_VOXELS: usize = 1 << 28;

/// Spatial extents of a volume, row-major with `z` fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    /// Validated constructor: every extent positive and the product bounded
    /// by [`MAX_VOXELS`].
    pub fn checked(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            bail!(Argument, "dims must be positive, got ({nx}, {ny}, {nz})");
        }
        match nx.checked_mul(ny).and_then(|v| v.checked_mul(nz)) {
            Some(n) if n <= MAX_VOXELS => Ok(Self { nx, ny, nz }),
            _ => bail!(Sizing, "volume ({nx}, {ny}, {nz}) exceeds {MAX_VOXELS} voxels"),
        }
    }

    pub fn validate(self) -> Result<Self> {
        Self::checked(self.nx, self.ny, self.nz)
    }

    #[inline]
    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.ny + y) * self.nz + z
    }

    #[inline]
    pub const fn coords(&self, i: usize) -> (usize, usize, usize) {
        let z = i % self.nz;
        let y = (i / self.nz) % self.ny;
        let x = i / (self.ny * self.nz);
        (x, y, z)
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn from_array(a: [usize; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        self.as_array()[axis]
    }

    /// Element stride of `axis` in the flattened layout.
    pub const fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.ny * self.nz,
            1 => self.nz,
            _ => 1,
        }
    }

    /// Same dims with `axis` replaced by `len`.
    pub fn with_axis(&self, axis: usize, len: usize) -> Self {
        let mut a = self.as_array();
        a[axis] = len;
        Self::from_array(a)
    }
}

impl core::fmt::Display for Dims {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// `len` indices centered on `n / 2`, the DC position of a centered
/// transform of length `n`.
pub fn centered_range(n: usize, len: usize) -> Range<usize> {
    let start = (n / 2).saturating_sub(len / 2);
    start..(start + len).min(n)
}

/// Dense complex 3D array in image or k-space domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    dims: Dims,
    data: Vec<Cplx>,
}

impl ComplexVolume {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![Cplx::zero(); dims.len()] }
    }

    pub fn filled(dims: Dims, value: Cplx) -> Self {
        Self { dims, data: vec![value; dims.len()] }
    }

    pub fn from_vec(dims: Dims, data: Vec<Cplx>) -> Result<Self> {
        let dims = dims.validate()?;
        if data.len() != dims.len() {
            bail!(Argument, "data length {} does not match dims {dims}", data.len());
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> Cplx) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for x in 0..dims.nx {
            for y in 0..dims.ny {
                for z in 0..dims.nz {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { dims, data }
    }

    /// Build from the planar layout: the real plane followed by the imaginary plane.
    pub fn from_planar(dims: Dims, planar: &[Real]) -> Result<Self> {
        let n = dims.len();
        if planar.len() != 2 * n {
            bail!(Argument, "planar buffer of {} reals does not hold a {dims} volume", planar.len());
        }
        let data = (0..n).map(|i| Cplx::new(planar[i], planar[n + i])).collect();
        Ok(Self { dims, data })
    }

    pub fn write_planar(&self, out: &mut [Real]) {
        let n = self.data.len();
        debug_assert_eq!(out.len(), 2 * n);
        let (re, im) = out.split_at_mut(n);
        for ((r, i), c) in re.iter_mut().zip(im.iter_mut()).zip(&self.data) {
            *r = c.re;
            *i = c.im;
        }
    }

    pub fn to_planar(&self) -> Vec<Real> {
        let mut out = vec![0.0; 2 * self.data.len()];
        self.write_planar(&mut out);
        out
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[Cplx] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Cplx] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Cplx> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> Cplx {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: Cplx) {
        let i = self.dims.index(x, y, z);
        self.data[i] = v;
    }

    pub fn norm_sqr(&self) -> Real {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> Real {
        self.norm_sqr().sqrt()
    }

    /// Inner product `Σ conj(self) · other`.
    pub fn dot(&self, other: &Self) -> Cplx {
        debug_assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs(&self) -> Real {
        self.data.iter().map(|c| c.norm()).fold(0.0, Real::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Cplx) -> Cplx) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|&c| f(c)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Cplx, Cplx) -> Cplx) -> Self {
        debug_assert_eq!(self.dims, other.dims);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { dims: self.dims, data }
    }

    pub fn scale(&self, s: Real) -> Self {
        self.map(|c| c * s)
    }

    pub fn scale_mut(&mut self, s: Real) {
        self.data.iter_mut().for_each(|c| *c *= s);
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: Cplx, x: &Self) {
        debug_assert_eq!(self.dims, x.dims);
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn abs(&self) -> Vec<Real> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    /// Sub-volume `range` along `axis`.
    pub fn crop_axis(&self, axis: usize, range: Range<usize>) -> Result<Self> {
        let len = self.dims.axis_len(axis);
        if axis > 2 || range.end > len || range.start >= range.end {
            bail!(Argument, "crop {range:?} on axis {axis} of {}", self.dims);
        }
        let out_dims = self.dims.with_axis(axis, range.end - range.start);
        let src = self.dims;
        Ok(Self::from_fn(out_dims, |x, y, z| {
            let mut c = [x, y, z];
            c[axis] += range.start;
            self.data[src.index(c[0], c[1], c[2])]
        }))
    }
}
