//! Self-supervised physics-guided unrolled reconstruction for accelerated
//! 3D multi-coil MRI.
//!
//! This crate is `no_std` (with `alloc`) and holds every numerical piece of
//! the pipeline: complex volume arithmetic and centered FFTs, 3D
//! convolutions with a small reverse-mode tape, the multi-coil encoding
//! operator, k-space sampling and splitting, the unrolled network with a
//! conjugate-gradient data-consistency unit, losses and the training loop,
//! a phantom simulator, and the compressed-sensing baseline plus metrics.
//!
//! File formats, the command-line tool and anything touching the OS live in
//! the companion `ssdu3d` crate.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod net;
pub mod phantom;
pub mod physics;
pub mod sample;
pub mod sampling;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Scalar aliases plus `Float`, which supplies the math methods in `no_std`
/// builds. Glob-imported so nothing warns once a dependency links std and the
/// inherent float methods take over.
pub(crate) mod prelude {
    pub use crate::{Cplx, Real};
    pub use num_traits::Float;
}
pub use tensor::{ComplexVolume, Dims, RealTensor4};

/// Scalar type used for every floating-point computation.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
/// Scalar type used for every floating-point computation.
#[cfg(feature = "f32")]
pub type Real = f32;

/// Complex scalar built on [`Real`].
pub type Cplx = num_complex::Complex<Real>;

/// Seeded generator used by every randomized routine in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Build the crate-wide seeded generator.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
