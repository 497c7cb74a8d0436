use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{bail, Result};
use crate::physics::{CoilKspace, CoilSet};
use crate::sampling::SamplingMask;
use crate::tensor::{ComplexVolume, Fft3};

/// One readout slab of a whole-volume acquisition, back in 3D k-space.
#[derive(Clone, Debug, PartialEq)]
pub struct SubVolume {
    pub slab_index: usize,
    pub readout_range: Range<usize>,
    pub kspace: CoilKspace,
    pub mask: SamplingMask,
    pub coils: CoilSet,
    pub ground_truth: Option<ComplexVolume>,
}

/// Cut a multi-coil acquisition into slabs along the fully sampled readout.
///
/// The readout axis is inverse-transformed to hybrid space, cut into
/// `slab_len` windows every `stride` positions, and each window is
/// transformed back along the readout with its own length. Coil maps and
/// the optional ground-truth image are cropped identically.
pub fn extract_subvolumes(
    kspace: &[ComplexVolume],
    mask: &SamplingMask,
    coils: &CoilSet,
    ground_truth: Option<&ComplexVolume>,
    slab_len: usize,
    stride: usize,
) -> Result<Vec<SubVolume>> {
    let dims = mask.dims();
    let axis = mask.readout_axis();
    let n = dims.axis_len(axis);
    if slab_len == 0 || slab_len > n {
        bail!(Argument, "slab length {slab_len} must lie in 1..={n}");
    }
    if stride == 0 {
        bail!(Argument, "slab stride must be positive");
    }
    if kspace.len() != coils.n_coils() || coils.dims() != dims || kspace.iter().any(|k| k.dims() != dims) {
        bail!(Argument, "k-space, coils and mask must share dims and coil count");
    }
    if ground_truth.is_some_and(|g| g.dims() != dims) {
        bail!(Argument, "ground truth dims differ from the acquisition");
    }
    if !mask.is_readout_constant() {
        bail!(Argument, "slabbing needs a mask that is constant along the readout");
    }

    let full_fft = Fft3::new(dims)?;
    let hybrid: Vec<ComplexVolume> = kspace
        .iter()
        .map(|k| {
            let mut h = k.clone();
            full_fft.transform_axis(&mut h, axis, true);
            h
        })
        .collect();
    let slab_fft = Fft3::new(dims.with_axis(axis, slab_len))?;

    let count = (n - slab_len) / stride + 1;
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let range = s * stride..s * stride + slab_len;
        let kspace = hybrid
            .iter()
            .map(|h| {
                let mut slab = h.crop_axis(axis, range.clone())?;
                slab_fft.transform_axis(&mut slab, axis, false);
                Ok(slab)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(SubVolume {
            slab_index: s,
            readout_range: range.clone(),
            kspace,
            mask: mask.crop_readout(range.clone())?,
            coils: coils.crop_axis(axis, range.clone())?,
            ground_truth: ground_truth.map(|g| g.crop_axis(axis, range.clone())).transpose()?,
        });
    }
    Ok(out)
}
