//! Evaluation and training reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssdu3d_core::eval::Scores;
use ssdu3d_core::Real;

use crate::error::{read_file, write_file, Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON schema that every [`MetricsReport`] validates against.
pub const METRICS_REPORT_SCHEMA: &str = include_str!("../schema/metrics_report.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeScores {
    pub subject_id: u32,
    pub slab_index: u32,
    pub psnr: Real,
    pub ssim: Real,
    pub nmse: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub psnr: Real,
    pub ssim: Real,
    pub nmse: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub method: String,
    /// Mean acceleration of the evaluated acquisitions.
    pub rate: Real,
    /// Reconstruction time summed over volumes.
    pub runtime_seconds: Real,
    pub volumes: Vec<VolumeScores>,
    pub mean: MeanScores,
}

impl MetricsReport {
    pub fn new(method: &str, rate: Real, runtime_seconds: Real, volumes: Vec<VolumeScores>) -> Result<Self> {
        if volumes.is_empty() {
            return Err(Error::Usage("nothing to evaluate".into()));
        }
        let n = volumes.len() as Real;
        let mean = |f: fn(&VolumeScores) -> Real| volumes.iter().map(f).sum::<Real>() / n;
        let mean = MeanScores { psnr: mean(|v| v.psnr), ssim: mean(|v| v.ssim), nmse: mean(|v| v.nmse) };
        Ok(Self { schema_version: REPORT_SCHEMA_VERSION, method: method.into(), rate, runtime_seconds, volumes, mean })
    }

    /// Human-readable comparison table.
    pub fn table(&self) -> String {
        let mut s = format!("method {}  R={:.2}  runtime {:.2}s\n", self.method, self.rate, self.runtime_seconds);
        let _ = writeln!(s, "{:>8} {:>6} {:>9} {:>7} {:>10}", "subject", "slab", "psnr_db", "ssim", "nmse");
        for v in &self.volumes {
            let _ = writeln!(s, "{:>8} {:>6} {:>9.3} {:>7.4} {:>10.3e}", v.subject_id, v.slab_index, v.psnr, v.ssim, v.nmse);
        }
        let _ = writeln!(s, "{:>15} {:>9.3} {:>7.4} {:>10.3e}", "mean", self.mean.psnr, self.mean.ssim, self.mean.nmse);
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

impl VolumeScores {
    pub fn new(subject_id: u32, slab_index: u32, s: Scores) -> Self {
        Self { subject_id, slab_index, psnr: s.psnr, ssim: s.ssim, nmse: s.nmse }
    }
}

/// Written by `train` next to the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<Real>,
    pub wall_time_seconds: Real,
    pub checkpoint: PathBuf,
    pub n_samples: usize,
    pub n_parameters: usize,
    pub config: serde_json::Value,
}

impl TrainReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Index of a reconstruction directory, written by `reconstruct` and `baseline`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconIndex {
    pub method: String,
    pub rate: Real,
    pub runtime_seconds: Real,
    pub volumes: Vec<ReconEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconEntry {
    pub subject_id: u32,
    pub slab_index: u32,
    /// Raw dump, relative to the directory.
    pub raw: String,
    pub png: String,
    pub runtime_seconds: Real,
}

pub const RECON_INDEX: &str = "index.json";

impl ReconIndex {
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(RECON_INDEX), self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(RECON_INDEX))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}
