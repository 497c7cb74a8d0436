//! The unrolled network: a shared 3D ResNet regularizer alternating with a
//! conjugate-gradient data-consistency solve.

mod dc;
mod resnet;
mod unrolled;

pub use dc::{dc_solve, dc_solve_taped, CgConfig, DcProblem, DcSolution};
pub use resnet::{KernelVars, NetConfig, ResBlock, ResNetParams, ResNetVars, MIN_EXTENT};
pub use unrolled::{unrolled_forward, unrolled_forward_taped, ModelConfig, ParamGroup, UnrolledParams, UnrolledVars};
