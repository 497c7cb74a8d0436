//! Image-quality metrics and the compressed-sensing baseline.

mod cs;
mod metrics;
pub mod transform;

pub use cs::{cs_objective, cs_recon, zero_filled, CsConfig, CsResult, Sparsity, MAX_INCREASES};
pub use metrics::{nmse, psnr, score, ssim, Scores, PSNR_CAP, SSIM_K1, SSIM_K2, SSIM_WINDOW};

use crate::error::Result;
use crate::net::{unrolled_forward, UnrolledParams};
use crate::physics::EncodingOperator;
use crate::sample::normalization_factor;
use crate::tensor::ComplexVolume;

/// Run the trained network on a whole acquisition: normalize as in
/// training, reconstruct, and return in acquisition units.
pub fn unrolled_recon(y: &[ComplexVolume], op: &EncodingOperator, params: &UnrolledParams) -> Result<ComplexVolume> {
    let f = normalization_factor(y, op)?;
    let scaled: alloc::vec::Vec<ComplexVolume> = y.iter().map(|k| k.scale(f)).collect();
    Ok(unrolled_forward(&scaled, op, params, params.config.unrolls)?.scale(1.0 / f))
}

/// [`cs_recon`] on data normalized like the network input, so `λ` carries
/// the same meaning across subjects.
pub fn cs_recon_normalized(y: &[ComplexVolume], op: &EncodingOperator, cfg: &CsConfig) -> Result<CsResult> {
    let f = normalization_factor(y, op)?;
    let scaled: alloc::vec::Vec<ComplexVolume> = y.iter().map(|k| k.scale(f)).collect();
    let mut r = cs_recon(&scaled, op, cfg)?;
    r.image.scale_mut(1.0 / f);
    Ok(r)
}
