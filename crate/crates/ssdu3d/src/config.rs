//! JSON configuration files.
//!
//! Every file may carry a top-level `"version"`; when present it must equal
//! [`CONFIG_VERSION`]. Missing fields take their defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ssdu3d_core::phantom::SubjectSpec;
use ssdu3d_core::sampling::SplitConfig;

use crate::error::{read_file, Error, Result};

pub const CONFIG_VERSION: u64 = 1;

/// What `simulate` produces per subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub subject: SubjectSpec,
    /// Readout extent of each slab; `None` keeps whole volumes.
    pub slab_len: Option<usize>,
    /// Defaults to `slab_len` (non-overlapping slabs).
    pub stride: Option<usize>,
    pub split: SplitConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { subject: SubjectSpec::default(), slab_len: Some(8), stride: None, split: SplitConfig::default() }
    }
}

/// Parse a config, checking the optional version tag.
pub fn parse_config<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("config {origin}: {e}")))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(v) = obj.remove("version") {
            if v.as_u64() != Some(CONFIG_VERSION) {
                return Err(Error::Usage(format!("config {origin}: version {v}, this build reads {CONFIG_VERSION}")));
            }
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Usage(format!("config {origin}: {e}")))
}

/// Load `path`, or the default when no path is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let bytes = read_file(p)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Usage(format!("config {} is not UTF-8", p.display())))?;
            parse_config(&text, &p.display().to_string())
        }
    }
}

/// Config as JSON with the version tag added.
pub fn to_versioned_json<T: Serialize>(cfg: &T) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config types serialize");
    if let Some(obj) = v.as_object_mut() {
        obj.insert("version".into(), CONFIG_VERSION.into());
    }
    v
}
