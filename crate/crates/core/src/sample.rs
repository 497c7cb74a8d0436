//! One training/evaluation sub-volume and its normalization.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::physics::{CoilKspace, CoilSet, EncodingOperator};
use crate::sampling::{split_gaussian, MaskSplit, SamplingMask, SplitConfig, SubVolume};
use crate::tensor::ComplexVolume;
use crate::prelude::*;

/// Acquired k-space of one sub-volume with everything needed to train on it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Per-coil k-space, zero off `Ω`.
    pub kspace: CoilKspace,
    pub coils: Arc<CoilSet>,
    /// The acquisition mask `Ω`.
    pub mask: SamplingMask,
    pub split: MaskSplit,
    pub ground_truth: Option<ComplexVolume>,
    pub subject_id: u32,
    pub slab_index: u32,
    /// Factor already applied to `kspace` and `ground_truth`; divide a
    /// reconstruction by it to return to acquisition units.
    pub scale: Real,
}

impl TrainingSample {
    /// Assemble and check a sample.
    pub fn new(
        kspace: CoilKspace,
        coils: Arc<CoilSet>,
        mask: SamplingMask,
        split: MaskSplit,
        ground_truth: Option<ComplexVolume>,
        subject_id: u32,
        slab_index: u32,
        scale: Real,
    ) -> Result<Self> {
        let s = Self { kspace, coils, mask, split, ground_truth, subject_id, slab_index, scale };
        s.validate()?;
        Ok(s)
    }

    /// Build from a slab, drawing the `Θ`/`Λ` split and normalizing.
    pub fn from_subvolume(sub: SubVolume, subject_id: u32, split_cfg: &SplitConfig) -> Result<Self> {
        let split = split_gaussian(&sub.mask, split_cfg)?;
        let mut s = Self {
            kspace: sub.kspace,
            coils: Arc::new(sub.coils),
            mask: sub.mask,
            split,
            ground_truth: sub.ground_truth,
            subject_id,
            slab_index: sub.slab_index as u32,
            scale: 1.0,
        };
        s.normalize()?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.mask.dims();
        if self.coils.dims() != dims || self.kspace.len() != self.coils.n_coils() {
            bail!(Argument, "sample coils do not match its mask");
        }
        if self.kspace.iter().any(|k| k.dims() != dims) || self.ground_truth.as_ref().is_some_and(|g| g.dims() != dims) {
            bail!(Argument, "sample volumes disagree on dims");
        }
        self.split.validate(&self.mask)?;
        for k in &self.kspace {
            if k.data().iter().zip(self.mask.bits()).any(|(v, &b)| !b && (v.re != 0.0 || v.im != 0.0)) {
                bail!(Argument, "sample k-space is nonzero off the acquisition mask");
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            bail!(Argument, "sample scale must be positive, got {}", self.scale);
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<EncodingOperator> {
        EncodingOperator::new(self.coils.clone(), self.mask.clone())
    }

    /// Rescale so the 99th percentile of the zero-filled magnitude is 1.
    pub fn normalize(&mut self) -> Result<()> {
        let f = normalization_factor(&self.kspace, &self.operator()?)?;
        for k in self.kspace.iter_mut() {
            k.scale_mut(f);
        }
        if let Some(g) = self.ground_truth.as_mut() {
            g.scale_mut(f);
        }
        self.scale *= f;
        Ok(())
    }

    /// Redraw the `Θ`/`Λ` split with a new configuration.
    pub fn resplit(&mut self, cfg: &SplitConfig) -> Result<()> {
        self.split = split_gaussian(&self.mask, cfg)?;
        Ok(())
    }
}

/// Factor that brings the 99th percentile of `|Eᴴy|` to 1.
pub fn normalization_factor(y: &[ComplexVolume], op: &EncodingOperator) -> Result<Real> {
    let p = percentile(&op.adjoint(y)?.abs(), 0.99);
    if !(p > 0.0 && p.is_finite()) {
        bail!(DegenerateReference, "zero-filled image has no signal to normalize by");
    }
    Ok(1.0 / p)
}

/// Nearest-rank percentile of `values` for `q ∈ [0, 1]`.
pub fn percentile(values: &[Real], q: Real) -> Real {
    if values.is_empty() {
        return 0.0;
    }
    let mut v: Vec<Real> = values.to_vec();
    let rank = ((q * v.len() as Real).ceil() as usize).clamp(1, v.len()) - 1;
    let (_, x, _) = v.select_nth_unstable_by(rank, |a, b| a.total_cmp(b));
    *x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::CoilSet;
    use crate::sampling::{extract_subvolumes, generate_mask};
    use crate::tensor::Dims;
    use crate::Cplx;
    use alloc::vec;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<Real> = (1..=100).map(|i| i as Real).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[5.0], 0.5), 5.0);
    }

    #[test]
    fn normalized_sample_has_unit_percentile() {
        let d = Dims::new(4, 8, 8);
        let mask = generate_mask(d, 2.0, (2, 2), 0, 0).unwrap();
        let coils = CoilSet::new(vec![ComplexVolume::filled(d, Cplx::new(1.0, 0.0))]).unwrap();
        let truth = ComplexVolume::from_fn(d, |x, y, z| Cplx::new(3.0 + (x + y + z) as Real, 0.0));
        let op = EncodingOperator::new(Arc::new(coils.clone()), mask.clone()).unwrap();
        let k = op.encode(&truth).unwrap();
        let sub = extract_subvolumes(&k, &mask, &coils, Some(&truth), 4, 4).unwrap().remove(0);
        let s = TrainingSample::from_subvolume(sub, 0, &SplitConfig::default()).unwrap();
        let zf = s.operator().unwrap().adjoint(&s.kspace).unwrap();
        assert!((percentile(&zf.abs(), 0.99) - 1.0).abs() < 1e-9);
        let gt = s.ground_truth.as_ref().unwrap();
        assert!((gt.get(0, 0, 0).re / s.scale - 3.0).abs() < 1e-9);
    }
}
