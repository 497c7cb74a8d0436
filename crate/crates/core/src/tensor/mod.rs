//! Complex volumes, FFTs, convolutions, autodiff and the Adam optimizer.

pub mod adam;
pub mod autodiff;
pub mod conv;
pub mod fft;
mod real4;
mod volume;

pub use adam::{adam_step, AdamState};
pub use autodiff::{Gradients, LinearMap, ScalarFunction, Tape, Var};
pub use conv::{conv3d, ConvKernel};
pub use fft::{fft3_centered, fft_axis, ifft3_centered, ifft_axis, Fft3};
pub use real4::RealTensor4;
pub use volume::{centered_range, ComplexVolume, Dims, MAX_VOXELS};
