//! Acquisition masks, the self-supervised `Θ`/`Λ` split, and slab extraction.

mod mask;
mod slab;
mod split;

pub use mask::{generate_mask, plane_axes, retrospective_subsample, SamplingMask};
pub use slab::{extract_subvolumes, SubVolume};
pub use split::{lambda_count, split_gaussian, MaskSplit, SplitConfig, WeightedSet};
