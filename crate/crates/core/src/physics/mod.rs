//! Multi-coil encoding operator and coil sensitivity calibration.

mod coils;
mod encoding;

pub use coils::{estimate_coil_maps, extract_centered_block, CoilSet, RSS_FLOOR};
pub use encoding::{coils_from_planar, coils_to_planar, CoilKspace, EncodeMap, EncodingOperator, NormalMap};
