use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::physics::{estimate_coil_maps, extract_centered_block, CoilKspace, CoilSet};
use crate::prelude::*;
use crate::sample::TrainingSample;
use crate::sampling::{extract_subvolumes, generate_mask, plane_axes, retrospective_subsample, SamplingMask, SplitConfig};
use crate::tensor::ComplexVolume;

use super::{generate_coils, generate_phantom, simulate_acquisition, AcquisitionSpec, PhantomSpec};

/// Retrospective undersampling applied on top of the acquisition.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Retrospective {
    pub rate: Real,
    pub acs: (usize, usize),
}

/// Everything needed to simulate one subject. The seeds inside `phantom`
/// and `acquisition` are ignored; [`simulate_subject`] derives them from its
/// own seed and the subject id.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SubjectSpec {
    pub phantom: PhantomSpec,
    pub acquisition: AcquisitionSpec,
    pub retrospective: Option<Retrospective>,
    /// Calibrate coil maps from the ACS of the final mask instead of using
    /// the simulation maps.
    pub estimate_coils: bool,
}

impl Default for SubjectSpec {
    fn default() -> Self {
        Self {
            phantom: PhantomSpec::default(),
            acquisition: AcquisitionSpec::default(),
            retrospective: Some(Retrospective { rate: 6.0, acs: (6, 6) }),
            estimate_coils: true,
        }
    }
}

/// One simulated acquisition.
#[derive(Clone, Debug, PartialEq)]
pub struct Subject {
    pub id: u32,
    pub truth: ComplexVolume,
    /// Maps used to generate the data.
    pub true_coils: CoilSet,
    /// The prospective mask.
    pub acquired_mask: SamplingMask,
    /// Final mask `Ω` (retrospectively thinned if configured).
    pub mask: SamplingMask,
    /// k-space on `Ω`.
    pub kspace: CoilKspace,
    /// Maps used for reconstruction.
    pub coils: CoilSet,
}

/// SplitMix64 step, used to derive independent seed streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn zero_off(k: &mut CoilKspace, mask: &SamplingMask) {
    for c in k.iter_mut() {
        c.data_mut().iter_mut().zip(mask.bits()).filter(|(_, &b)| !b).for_each(|(v, _)| *v = Cplx::new(0.0, 0.0));
    }
}

/// Calibrate maps from the centered ACS block of `k`.
pub fn calibrate_coils(k: &[ComplexVolume], mask: &SamplingMask) -> Result<CoilSet> {
    let d = mask.dims();
    let (a, b) = plane_axes(mask.readout_axis());
    let mut block = d.as_array();
    block[a] = mask.acs().0;
    block[b] = mask.acs().1;
    let block = crate::Dims::from_array(block);
    if block.is_empty() {
        bail!(Argument, "mask has no ACS region to calibrate from");
    }
    let acs: Vec<ComplexVolume> = k.iter().map(|c| extract_centered_block(c, block)).collect::<Result<_>>()?;
    estimate_coil_maps(&acs, d)
}

/// Phantom, coils, mask(s) and noisy k-space for subject `id`.
pub fn simulate_subject(spec: &SubjectSpec, id: u32, seed: u64) -> Result<Subject> {
    spec.acquisition.validate()?;
    let base = derive_seed(seed, id as u64);
    let s = |k: u64| derive_seed(base, k);
    let truth = generate_phantom(&PhantomSpec { seed: s(1), ..spec.phantom.clone() })?;
    let d = truth.dims();
    let acq = &spec.acquisition;
    let true_coils = generate_coils(d, acq.n_coils, s(2))?;
    let acquired_mask = generate_mask(d, acq.rate, acq.acs, acq.readout_axis, s(3))?;
    let mut kspace = simulate_acquisition(&truth, &true_coils, &acquired_mask, acq.noise_sigma, s(4))?;
    let mask = match &spec.retrospective {
        Some(r) => retrospective_subsample(&acquired_mask, r.rate, r.acs, s(5))?,
        None => acquired_mask.clone(),
    };
    zero_off(&mut kspace, &mask);
    let coils = if spec.estimate_coils { calibrate_coils(&kspace, &mask)? } else { true_coils.clone() };
    Ok(Subject { id, truth, true_coils, acquired_mask, mask, kspace, coils })
}

impl Subject {
    /// k-space restricted to `mask`, which must be a subset of the acquisition.
    pub fn kspace_on(&self, mask: &SamplingMask) -> Result<CoilKspace> {
        if !mask.is_subset_of(&self.mask) {
            bail!(Argument, "requested mask is not within the subject's sampled set");
        }
        let mut k = self.kspace.clone();
        zero_off(&mut k, mask);
        Ok(k)
    }

    /// Slabs along the readout, each split and normalized for training.
    pub fn training_samples(&self, slab_len: usize, stride: usize, split: &SplitConfig) -> Result<Vec<TrainingSample>> {
        let subs = extract_subvolumes(&self.kspace, &self.mask, &self.coils, Some(&self.truth), slab_len, stride)?;
        subs.into_iter()
            .map(|sub| {
                let cfg = SplitConfig { seed: derive_seed(split.seed, ((self.id as u64) << 20) | sub.slab_index as u64), ..split.clone() };
                TrainingSample::from_subvolume(sub, self.id, &cfg)
            })
            .collect()
    }
}
