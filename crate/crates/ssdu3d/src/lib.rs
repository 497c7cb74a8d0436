//! File formats and the command-line tool around [`ssdu3d_core`].
//!
//! `simulate` writes datasets, `train` checkpoints, `reconstruct` and
//! `baseline` directories of raw and PNG images, and `evaluate` a JSON
//! [`report::MetricsReport`].

pub mod binary;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod image;
pub mod report;

pub use error::{Error, Result};
