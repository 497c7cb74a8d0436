use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::prelude::*;
use rand::seq::index;

use crate::error::{bail, Result};
use crate::tensor::{centered_range, Dims};
use crate::seeded_rng;

/// Binary k-space sampling pattern.
///
/// Acquisition masks (`Ω`) are fully sampled along `readout_axis` and keep
/// the centered `acs` block in the phase-encoding plane; the self-supervised
/// subsets `Θ`/`Λ` are general 3D masks and carry `acs = (0, 0)` unless the
/// block was kept intact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SamplingMask {
    dims: Dims,
    bits: Vec<bool>,
    acs: (usize, usize),
    readout_axis: usize,
}

/// The two phase-encoding axes for a given readout axis, in increasing order.
pub fn plane_axes(readout_axis: usize) -> (usize, usize) {
    match readout_axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl SamplingMask {
    pub fn from_bits(dims: Dims, bits: Vec<bool>, acs: (usize, usize), readout_axis: usize) -> Result<Self> {
        let dims = dims.validate()?;
        if readout_axis > 2 {
            bail!(Argument, "readout axis {readout_axis} out of range");
        }
        if bits.len() != dims.len() {
            bail!(Argument, "{} mask bits for a {dims} volume", bits.len());
        }
        let (a1, a2) = plane_axes(readout_axis);
        if acs.0 > dims.axis_len(a1) || acs.1 > dims.axis_len(a2) {
            bail!(Argument, "ACS {acs:?} does not fit the phase-encoding plane of {dims}");
        }
        Ok(Self { dims, bits, acs, readout_axis })
    }

    pub fn full(dims: Dims, readout_axis: usize) -> Result<Self> {
        let (a1, a2) = plane_axes(readout_axis.min(2));
        let acs = (dims.axis_len(a1), dims.axis_len(a2));
        Self::from_bits(dims, vec![true; dims.len()], acs, readout_axis)
    }

    pub fn empty(dims: Dims, readout_axis: usize) -> Result<Self> {
        Self::from_bits(dims, vec![false; dims.len()], (0, 0), readout_axis)
    }

    /// Replicate a phase-encoding plane pattern (`plane[i1 * n2 + i2]`)
    /// along the readout axis.
    pub fn from_plane(dims: Dims, plane: &[bool], acs: (usize, usize), readout_axis: usize) -> Result<Self> {
        let (a1, a2) = plane_axes(readout_axis.min(2));
        let (n1, n2) = (dims.axis_len(a1), dims.axis_len(a2));
        if plane.len() != n1 * n2 {
            bail!(Argument, "plane pattern of {} for a {n1}x{n2} plane", plane.len());
        }
        let bits = (0..dims.len())
            .map(|i| {
                let c = dims.coords(i);
                let c = [c.0, c.1, c.2];
                plane[c[a1] * n2 + c[a2]]
            })
            .collect();
        Self::from_bits(dims, bits, acs, readout_axis)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn acs(&self) -> (usize, usize) {
        self.acs
    }

    pub fn readout_axis(&self) -> usize {
        self.readout_axis
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn with_acs(mut self, acs: (usize, usize)) -> Self {
        self.acs = acs;
        self
    }

    pub fn plane_dims(&self) -> (usize, usize) {
        let (a1, a2) = plane_axes(self.readout_axis);
        (self.dims.axis_len(a1), self.dims.axis_len(a2))
    }

    /// Centered ACS index ranges along the two phase-encoding axes.
    pub fn acs_ranges(&self) -> (Range<usize>, Range<usize>) {
        let (n1, n2) = self.plane_dims();
        (centered_range(n1, self.acs.0), centered_range(n2, self.acs.1))
    }

    /// Whether voxel `i` lies in the ACS block (any readout position).
    pub fn in_acs(&self, i: usize) -> bool {
        let (a1, a2) = plane_axes(self.readout_axis);
        let (r1, r2) = self.acs_ranges();
        let c = self.dims.coords(i);
        let c = [c.0, c.1, c.2];
        r1.contains(&c[a1]) && r2.contains(&c[a2])
    }

    /// Phase-encoding plane pattern at readout position 0.
    pub fn plane(&self) -> Vec<bool> {
        let (a1, a2) = plane_axes(self.readout_axis);
        let (n1, n2) = self.plane_dims();
        let mut out = vec![false; n1 * n2];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let mut c = [0usize; 3];
                c[a1] = i1;
                c[a2] = i2;
                out[i1 * n2 + i2] = self.bits[self.dims.index(c[0], c[1], c[2])];
            }
        }
        out
    }

    pub fn is_readout_constant(&self) -> bool {
        let plane = self.plane();
        let (a1, a2) = plane_axes(self.readout_axis);
        let n2 = self.plane_dims().1;
        (0..self.dims.len()).all(|i| {
            let c = self.dims.coords(i);
            let c = [c.0, c.1, c.2];
            self.bits[i] == plane[c[a1] * n2 + c[a2]]
        })
    }

    pub fn acs_fully_sampled(&self) -> bool {
        (0..self.dims.len()).all(|i| !self.in_acs(i) || self.bits[i])
    }

    /// Acquisition-mask invariants: ACS set everywhere and readout constant.
    pub fn validate_acquisition(&self) -> Result<()> {
        if !self.acs_fully_sampled() {
            bail!(Argument, "ACS block {:?} is not fully sampled", self.acs);
        }
        if !self.is_readout_constant() {
            bail!(Argument, "mask varies along the readout axis");
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims == other.dims && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &Self) -> Vec<bool> {
        self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect()
    }

    pub fn or(&self, other: &Self) -> Vec<bool> {
        self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect()
    }

    /// Set fraction of the phase-encoding plane.
    pub fn plane_fraction(&self) -> Real {
        let plane = self.plane();
        plane.iter().filter(|&&b| b).count() as Real / plane.len() as Real
    }

    /// Restrict to `range` along the readout axis.
    pub fn crop_readout(&self, range: Range<usize>) -> Result<Self> {
        let axis = self.readout_axis;
        if range.end > self.dims.axis_len(axis) || range.start >= range.end {
            bail!(Argument, "readout crop {range:?} out of bounds for {}", self.dims);
        }
        let out_dims = self.dims.with_axis(axis, range.end - range.start);
        let bits = (0..out_dims.len())
            .map(|i| {
                let c = out_dims.coords(i);
                let mut c = [c.0, c.1, c.2];
                c[axis] += range.start;
                self.bits[self.dims.index(c[0], c[1], c[2])]
            })
            .collect();
        Self::from_bits(out_dims, bits, self.acs, axis)
    }
}

fn target_count(plane: usize, rate: Real) -> usize {
    let t = (plane as Real / rate).round() as usize;
    t.clamp(1, plane)
}

/// Random uniform phase-encoding mask at acceleration `rate` with a
/// centered, fully sampled ACS block, replicated along the readout axis.
pub fn generate_mask(dims: Dims, rate: Real, acs: (usize, usize), readout_axis: usize, seed: u64) -> Result<SamplingMask> {
    let dims = dims.validate()?;
    if !(rate >= 1.0 && rate.is_finite()) {
        bail!(Argument, "acceleration must be >= 1, got {rate}");
    }
    if readout_axis > 2 {
        bail!(Argument, "readout axis {readout_axis} out of range");
    }
    let (a1, a2) = plane_axes(readout_axis);
    let (n1, n2) = (dims.axis_len(a1), dims.axis_len(a2));
    if acs.0 > n1 || acs.1 > n2 {
        bail!(Argument, "ACS {acs:?} does not fit the {n1}x{n2} phase-encoding plane");
    }
    let plane_len = n1 * n2;
    let target = target_count(plane_len, rate);
    let acs_count = acs.0 * acs.1;
    if acs_count > target {
        bail!(Infeasible, "ACS of {acs_count} samples exceeds the budget of {target} at R={rate}");
    }
    let (r1, r2) = (centered_range(n1, acs.0), centered_range(n2, acs.1));
    let mut plane = vec![false; plane_len];
    let mut outside = Vec::with_capacity(plane_len - acs_count);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            if r1.contains(&i1) && r2.contains(&i2) {
                plane[i1 * n2 + i2] = true;
            } else {
                outside.push(i1 * n2 + i2);
            }
        }
    }
    let mut rng = seeded_rng(seed);
    for k in index::sample(&mut rng, outside.len(), target - acs_count) {
        plane[outside[k]] = true;
    }
    SamplingMask::from_plane(dims, &plane, acs, readout_axis)
}

/// Further undersample an acquisition mask to `new_rate`, keeping the
/// (smaller) centered `new_acs` block and drawing the remaining samples
/// uniformly from the input's set locations.
pub fn retrospective_subsample(mask: &SamplingMask, new_rate: Real, new_acs: (usize, usize), seed: u64) -> Result<SamplingMask> {
    if !(new_rate >= 1.0 && new_rate.is_finite()) {
        bail!(Argument, "acceleration must be >= 1, got {new_rate}");
    }
    if !mask.is_readout_constant() {
        bail!(Argument, "retrospective subsampling needs a readout-constant mask");
    }
    let (n1, n2) = mask.plane_dims();
    if new_acs.0 > mask.acs.0 || new_acs.1 > mask.acs.1 {
        bail!(Argument, "new ACS {new_acs:?} is not contained in the existing ACS {:?}", mask.acs);
    }
    let plane = mask.plane();
    let available = plane.iter().filter(|&&b| b).count();
    let target = target_count(n1 * n2, new_rate);
    let (r1, r2) = (centered_range(n1, new_acs.0), centered_range(n2, new_acs.1));
    let mut out = vec![false; n1 * n2];
    let mut pool = Vec::new();
    let mut acs_count = 0;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let p = i1 * n2 + i2;
            if r1.contains(&i1) && r2.contains(&i2) {
                if !plane[p] {
                    bail!(Argument, "new ACS location ({i1}, {i2}) is not sampled in the input");
                }
                out[p] = true;
                acs_count += 1;
            } else if plane[p] {
                pool.push(p);
            }
        }
    }
    if target > available {
        bail!(Infeasible, "R={new_rate} needs {target} samples but only {available} are acquired");
    }
    if target < acs_count {
        bail!(Infeasible, "ACS of {acs_count} samples exceeds the budget of {target} at R={new_rate}");
    }
    let mut rng = seeded_rng(seed);
    for k in index::sample(&mut rng, pool.len(), target - acs_count) {
        out[pool[k]] = true;
    }
    SamplingMask::from_plane(mask.dims, &out, new_acs, mask.readout_axis)
}
