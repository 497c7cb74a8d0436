use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::prelude::*;
use crate::tensor::{ComplexVolume, Dims};

/// PSNR reported for an exact match.
pub const PSNR_CAP: Real = 99.0;
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: Real = 0.01;
pub const SSIM_K2: Real = 0.03;

fn same_dims(x: &ComplexVolume, r: &ComplexVolume) -> Result<()> {
    if x.dims() != r.dims() {
        bail!(Argument, "image dims {} differ from reference dims {}", x.dims(), r.dims());
    }
    Ok(())
}

/// `20·log10(max|ref| / rmse)` on magnitudes, capped at [`PSNR_CAP`].
pub fn psnr(x: &ComplexVolume, reference: &ComplexVolume) -> Result<Real> {
    same_dims(x, reference)?;
    let peak = reference.max_abs();
    if peak == 0.0 {
        bail!(DegenerateReference, "PSNR reference is all zero");
    }
    let mse = x.data().iter().zip(reference.data()).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum::<Real>() / x.len() as Real;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((20.0 * (peak / mse.sqrt()).log10()).min(PSNR_CAP))
}

/// `‖x − ref‖² / ‖ref‖²` on complex values.
pub fn nmse(x: &ComplexVolume, reference: &ComplexVolume) -> Result<Real> {
    same_dims(x, reference)?;
    let den = reference.norm_sqr();
    if den == 0.0 {
        bail!(DegenerateReference, "NMSE reference is all zero");
    }
    Ok(x.sub(reference).norm_sqr() / den)
}

/// Summed-volume table with a zero border, for O(1) box sums.
struct BoxSums {
    d: [usize; 3],
    t: Vec<Real>,
}

impl BoxSums {
    fn new(d: Dims, v: impl Fn(usize) -> Real) -> Self {
        let (nx, ny, nz) = (d.nx + 1, d.ny + 1, d.nz + 1);
        let mut t = vec![0.0; nx * ny * nz];
        let at = |x: usize, y: usize, z: usize| (x * ny + y) * nz + z;
        for x in 1..nx {
            for y in 1..ny {
                for z in 1..nz {
                    let s = v(d.index(x - 1, y - 1, z - 1)) + t[at(x - 1, y, z)] + t[at(x, y - 1, z)] + t[at(x, y, z - 1)]
                        - t[at(x - 1, y - 1, z)]
                        - t[at(x - 1, y, z - 1)]
                        - t[at(x, y - 1, z - 1)]
                        + t[at(x - 1, y - 1, z - 1)];
                    t[at(x, y, z)] = s;
                }
            }
        }
        Self { d: [nx, ny, nz], t }
    }

    /// Sum over `[x0, x0+w) × [y0, y0+w) × [z0, z0+w)` with per-axis widths.
    fn sum(&self, o: [usize; 3], w: [usize; 3]) -> Real {
        let (ny, nz) = (self.d[1], self.d[2]);
        let at = |x: usize, y: usize, z: usize| self.t[(x * ny + y) * nz + z];
        let (x0, y0, z0) = (o[0], o[1], o[2]);
        let (x1, y1, z1) = (x0 + w[0], y0 + w[1], z0 + w[2]);
        at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0) + at(x0, y0, z1) + at(x0, y1, z0) + at(x1, y0, z0)
            - at(x0, y0, z0)
    }
}

/// Mean structural similarity over every valid 7³ window (clipped to the
/// volume extent) of the magnitude images, both scaled by `1 / max|ref|`.
pub fn ssim(x: &ComplexVolume, reference: &ComplexVolume) -> Result<Real> {
    same_dims(x, reference)?;
    let peak = reference.max_abs();
    if peak == 0.0 {
        bail!(DegenerateReference, "SSIM reference is all zero");
    }
    let d = x.dims();
    let a: Vec<Real> = x.data().iter().map(|c| c.norm() / peak).collect();
    let b: Vec<Real> = reference.data().iter().map(|c| c.norm() / peak).collect();
    let sa = BoxSums::new(d, |i| a[i]);
    let sb = BoxSums::new(d, |i| b[i]);
    let saa = BoxSums::new(d, |i| a[i] * a[i]);
    let sbb = BoxSums::new(d, |i| b[i] * b[i]);
    let sab = BoxSums::new(d, |i| a[i] * b[i]);

    let w = [SSIM_WINDOW.min(d.nx), SSIM_WINDOW.min(d.ny), SSIM_WINDOW.min(d.nz)];
    let n = (w[0] * w[1] * w[2]) as Real;
    // sample covariance, as in the reference formulation
    let corr = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let mut total = 0.0;
    let mut count = 0usize;
    for x0 in 0..=d.nx - w[0] {
        for y0 in 0..=d.ny - w[1] {
            for z0 in 0..=d.nz - w[2] {
                let o = [x0, y0, z0];
                let (ma, mb) = (sa.sum(o, w) / n, sb.sum(o, w) / n);
                let va = (saa.sum(o, w) / n - ma * ma) * corr;
                let vb = (sbb.sum(o, w) / n - mb * mb) * corr;
                let cov = (sab.sum(o, w) / n - ma * mb) * corr;
                let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                total += s;
                count += 1;
            }
        }
    }
    Ok(total / count as Real)
}

/// PSNR, SSIM and NMSE of one reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scores {
    pub psnr: Real,
    pub ssim: Real,
    pub nmse: Real,
}

pub fn score(x: &ComplexVolume, reference: &ComplexVolume) -> Result<Scores> {
    Ok(Scores { psnr: psnr(x, reference)?, ssim: ssim(x, reference)?, nmse: nmse(x, reference)? })
}
