use alloc::vec::Vec;

use num_traits::Zero;

use crate::prelude::*;

use crate::error::{bail, Result};
use crate::tensor::{centered_range, ComplexVolume, Dims, Fft3};

/// Voxels whose root-sum-of-squares falls at or below this are zeroed.
pub const RSS_FLOOR: Real = 1e-8;

/// Per-coil complex sensitivity maps sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilSet {
    maps: Vec<ComplexVolume>,
}

impl CoilSet {
    pub fn new(maps: Vec<ComplexVolume>) -> Result<Self> {
        let Some(first) = maps.first() else { bail!(Argument, "a coil set needs at least one map") };
        let dims = first.dims();
        if let Some(bad) = maps.iter().find(|m| m.dims() != dims) {
            bail!(Argument, "coil map dims {} differ from {dims}", bad.dims());
        }
        Ok(Self { maps })
    }

    /// Build and normalize voxelwise so that `Σ_c |s_c|² = 1` wherever the
    /// raw root-sum-of-squares exceeds [`RSS_FLOOR`]; other voxels are zero.
    pub fn rss_normalized(mut maps: Vec<ComplexVolume>) -> Result<Self> {
        let dims = match maps.first() {
            Some(m) => m.dims(),
            None => bail!(Argument, "a coil set needs at least one map"),
        };
        if maps.iter().any(|m| m.dims() != dims) {
            bail!(Argument, "coil maps must share dims");
        }
        for i in 0..dims.len() {
            let rss = maps.iter().map(|m| m.data()[i].norm_sqr()).sum::<Real>().sqrt();
            for m in maps.iter_mut() {
                let v = &mut m.data_mut()[i];
                *v = if rss > RSS_FLOOR { *v / rss } else { Cplx::zero() };
            }
        }
        Self::new(maps)
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn dims(&self) -> Dims {
        self.maps[0].dims()
    }

    pub fn maps(&self) -> &[ComplexVolume] {
        &self.maps
    }

    pub fn into_maps(self) -> Vec<ComplexVolume> {
        self.maps
    }

    /// Root-sum-of-squares across coils per voxel.
    pub fn rss(&self) -> Vec<Real> {
        (0..self.dims().len())
            .map(|i| self.maps.iter().map(|m| m.data()[i].norm_sqr()).sum::<Real>().sqrt())
            .collect()
    }

    /// Worst deviation of the RSS from 1 over voxels where it is nonzero.
    pub fn rss_deviation(&self) -> Real {
        self.rss().into_iter().filter(|&r| r > 0.0).map(|r| (r - 1.0).abs()).fold(0.0, Real::max)
    }

    pub fn crop_axis(&self, axis: usize, range: core::ops::Range<usize>) -> Result<Self> {
        let maps = self.maps.iter().map(|m| m.crop_axis(axis, range.clone())).collect::<Result<Vec<_>>>()?;
        Self::new(maps)
    }
}

/// Hann taper of length `len` that is strictly positive on every sample.
fn raised_cosine(len: usize) -> Vec<Real> {
    let pi = core::f64::consts::PI as Real;
    (0..len).map(|j| 0.5 * (1.0 - (2.0 * pi * (j as Real + 1.0) / (len as Real + 1.0)).cos())).collect()
}

/// Copy the centered block of extents `block` out of a full k-space volume.
pub fn extract_centered_block(k: &ComplexVolume, block: Dims) -> Result<ComplexVolume> {
    let d = k.dims();
    if block.nx > d.nx || block.ny > d.ny || block.nz > d.nz {
        bail!(Argument, "block {block} exceeds volume {d}");
    }
    let (rx, ry, rz) = (centered_range(d.nx, block.nx), centered_range(d.ny, block.ny), centered_range(d.nz, block.nz));
    Ok(ComplexVolume::from_fn(block, |x, y, z| k.get(rx.start + x, ry.start + y, rz.start + z)))
}

/// Low-resolution coil sensitivity estimate from the calibration block.
///
/// Each coil's ACS block is apodized with a separable raised-cosine window,
/// zero-filled to `full_dims`, transformed to image space, and the set is
/// normalized by its root-sum-of-squares.
pub fn estimate_coil_maps(acs_kspace: &[ComplexVolume], full_dims: Dims) -> Result<CoilSet> {
    let full_dims = full_dims.validate()?;
    let Some(first) = acs_kspace.first() else { bail!(Argument, "no coils supplied for calibration") };
    let block = first.dims();
    if block.is_empty() || acs_kspace.iter().any(|k| k.dims() != block) {
        bail!(Argument, "ACS blocks must be nonempty and share dims");
    }
    if block.nx > full_dims.nx || block.ny > full_dims.ny || block.nz > full_dims.nz {
        bail!(Argument, "ACS block {block} exceeds the target grid {full_dims}");
    }
    if acs_kspace.iter().all(|k| k.data().iter().all(|c| c.is_zero())) {
        bail!(Argument, "ACS region is empty (all zero)");
    }
    let (wx, wy, wz) = (raised_cosine(block.nx), raised_cosine(block.ny), raised_cosine(block.nz));
    let (rx, ry, rz) = (
        centered_range(full_dims.nx, block.nx),
        centered_range(full_dims.ny, block.ny),
        centered_range(full_dims.nz, block.nz),
    );
    let fft = Fft3::new(full_dims)?;
    let mut maps = Vec::with_capacity(acs_kspace.len());
    for k in acs_kspace {
        let mut full = ComplexVolume::zeros(full_dims);
        for x in 0..block.nx {
            for y in 0..block.ny {
                for z in 0..block.nz {
                    let w = wx[x] * wy[y] * wz[z];
                    full.set(rx.start + x, ry.start + y, rz.start + z, k.get(x, y, z) * w);
                }
            }
        }
        fft.inverse(&mut full);
        maps.push(full);
    }
    CoilSet::rss_normalized(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::fft3_centered;
    use alloc::vec;

    /// Smooth maps built from the lowest periodic harmonics of the grid.
    fn smooth_maps(dims: Dims, n: usize) -> Vec<ComplexVolume> {
        let tau = 2.0 * core::f64::consts::PI as Real;
        (0..n)
            .map(|c| {
                let shift = c as Real * 0.7;
                ComplexVolume::from_fn(dims, |x, y, z| {
                    let u = tau * x as Real / dims.nx as Real;
                    let v = tau * y as Real / dims.ny as Real;
                    let w = tau * z as Real / dims.nz as Real;
                    let mag = 1.0 + 0.3 * (u + shift).cos() + 0.2 * (v - shift).sin() + 0.1 * w.cos();
                    Cplx::from_polar(mag, shift + 0.4 * v.sin())
                })
            })
            .collect()
    }

    #[test]
    fn normalization_gives_unit_rss() {
        let cs = CoilSet::rss_normalized(smooth_maps(Dims::new(4, 5, 6), 3)).unwrap();
        assert!(cs.rss_deviation() < 1e-12);
    }

    #[test]
    fn zero_voxels_stay_zero() {
        let mut maps = smooth_maps(Dims::new(2, 2, 2), 2);
        for m in maps.iter_mut() {
            m.data_mut()[3] = Cplx::zero();
        }
        let cs = CoilSet::rss_normalized(maps).unwrap();
        assert_eq!(cs.rss()[3], 0.0);
        assert!(cs.rss_deviation() < 1e-12);
    }

    #[test]
    fn mismatched_dims_rejected() {
        let maps = vec![ComplexVolume::zeros(Dims::new(2, 2, 2)), ComplexVolume::zeros(Dims::new(2, 2, 3))];
        assert!(CoilSet::new(maps).is_err());
        assert!(CoilSet::new(Vec::new()).is_err());
    }

    #[test]
    fn full_grid_calibration_recovers_smooth_truth() {
        let dims = Dims::new(16, 16, 16);
        let truth = CoilSet::rss_normalized(smooth_maps(dims, 4)).unwrap();
        // uniform real object: coil images equal the maps themselves
        let acs: Vec<_> = truth.maps().iter().map(|m| fft3_centered(m).unwrap()).collect();
        let est = estimate_coil_maps(&acs, dims).unwrap();
        assert!(est.rss_deviation() < 1e-6);
        let mut worst: Real = 0.0;
        for (a, b) in est.maps().iter().zip(truth.maps()) {
            worst = worst.max(a.sub(b).max_abs());
        }
        assert!(worst < 5e-2, "max abs error {worst}");
    }

    #[test]
    fn single_coil_has_unit_magnitude() {
        let dims = Dims::new(6, 8, 8);
        let obj = ComplexVolume::from_fn(dims, |x, y, _| Cplx::new(1.0 + x as Real, y as Real * 0.1));
        let k = fft3_centered(&obj).unwrap();
        let acs = extract_centered_block(&k, Dims::new(6, 4, 4)).unwrap();
        let est = estimate_coil_maps(&[acs], dims).unwrap();
        for c in est.maps()[0].data() {
            let m = c.norm();
            assert!(m == 0.0 || (m - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn all_zero_acs_is_rejected() {
        let acs = vec![ComplexVolume::zeros(Dims::new(4, 2, 2)); 2];
        assert!(matches!(estimate_coil_maps(&acs, Dims::new(4, 8, 8)), Err(crate::Error::Argument(_))));
    }
}
