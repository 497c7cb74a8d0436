use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{ComplexVolume, Dims};
use crate::Real;

/// Channel-major real tensor `(c, nx, ny, nz)`.
///
/// Complex volumes enter the convolution layers as two channels, real part
/// first, so the planar layout of [`ComplexVolume::to_planar`] is exactly a
/// two-channel `RealTensor4`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor4 {
    channels: usize,
    dims: Dims,
    data: Vec<Real>,
}

impl RealTensor4 {
    pub fn zeros(channels: usize, dims: Dims) -> Self {
        Self { channels, dims, data: vec![0.0; channels * dims.len()] }
    }

    pub fn from_vec(channels: usize, dims: Dims, data: Vec<Real>) -> Result<Self> {
        if data.len() != channels * dims.len() {
            bail!(Argument, "{} reals cannot form a {channels}x{dims} tensor", data.len());
        }
        Ok(Self { channels, dims, data })
    }

    pub fn from_complex(v: &ComplexVolume) -> Self {
        Self { channels: 2, dims: v.dims(), data: v.to_planar() }
    }

    pub fn to_complex(&self) -> Result<ComplexVolume> {
        if self.channels != 2 {
            bail!(Argument, "complex view needs 2 channels, tensor has {}", self.channels);
        }
        ComplexVolume::from_planar(self.dims, &self.data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Real> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[Real] {
        let n = self.dims.len();
        &self.data[c * n..(c + 1) * n]
    }
}
