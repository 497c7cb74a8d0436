//! Model checkpoints.
//!
//! Layout: magic `SSDUCKPT`, `u32` manifest length, JSON [`Manifest`], then
//! every parameter tensor as little-endian reals in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssdu3d_core::net::{ModelConfig, UnrolledParams};
use ssdu3d_core::Real;

use crate::binary::{expect_dtype, expect_magic, put_reals, put_u32, Reader, REAL_BYTES, REAL_DTYPE};
use crate::error::{read_file, write_file, Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SSDUCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the tensor section.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dtype: String,
    pub model: ModelConfig,
    pub mu: Real,
    pub unrolls: usize,
    /// SHA-256 of the model config's JSON encoding, hex.
    pub config_hash: String,
    pub tensors: Vec<TensorEntry>,
    pub payload_crc32: u32,
}

pub fn config_hash(cfg: &ModelConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("model config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_checkpoint(p: &UnrolledParams) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut tensors = Vec::new();
    for (info, data) in p.groups_info().into_iter().zip(p.groups()) {
        tensors.push(TensorEntry { name: info.name, shape: info.shape, offset: payload.len() as u64 });
        put_reals(&mut payload, data);
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        dtype: REAL_DTYPE.into(),
        model: p.config.clone(),
        mu: p.mu(),
        unrolls: p.config.unrolls,
        config_hash: config_hash(&p.config),
        tensors,
        payload_crc32: crc32fast::hash(&payload),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::format(format!("checkpoint manifest: {e}")))?;
    let mut out = Vec::with_capacity(12 + json.len() + payload.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(UnrolledParams, Manifest)> {
    let mut r = Reader::new(bytes, "checkpoint");
    expect_magic(&mut r, CHECKPOINT_MAGIC, "checkpoint")?;
    let len = r.u32()? as usize;
    let m: Manifest = serde_json::from_slice(r.take(len)?).map_err(|e| Error::format(format!("checkpoint manifest: {e}")))?;
    if m.version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("checkpoint version {}, expected {CHECKPOINT_VERSION}", m.version)));
    }
    expect_dtype(&m.dtype, REAL_DTYPE)?;
    if config_hash(&m.model) != m.config_hash {
        return Err(Error::format("checkpoint config hash does not match its model config"));
    }
    let payload = &bytes[r.position()..];
    let expected: usize = m.tensors.iter().map(|t| t.shape.iter().product::<usize>() * REAL_BYTES).sum();
    if payload.len() != expected {
        return Err(Error::format(format!("checkpoint payload is {} bytes, manifest describes {expected}", payload.len())));
    }
    if crc32fast::hash(payload) != m.payload_crc32 {
        return Err(Error::format("checkpoint payload checksum mismatch"));
    }
    let mut params = UnrolledParams::zeros(m.model.clone())?;
    let info = params.groups_info();
    if info.len() != m.tensors.len() {
        return Err(Error::format(format!("checkpoint has {} tensors, model expects {}", m.tensors.len(), info.len())));
    }
    for ((want, got), dst) in info.iter().zip(&m.tensors).zip(params.groups_mut()) {
        if want.name != got.name || want.shape != got.shape {
            return Err(Error::format(format!("checkpoint tensor {} {:?} where {} {:?} was expected", got.name, got.shape, want.name, want.shape)));
        }
        let mut t = Reader::new(payload, "checkpoint tensor");
        t.take(got.offset as usize)?;
        dst.copy_from_slice(&t.reals(dst.len())?);
    }
    Ok((params, m))
}

pub fn save_checkpoint(path: &Path, p: &UnrolledParams) -> Result<()> {
    write_file(path, &encode_checkpoint(p)?)
}

pub fn load_checkpoint(path: &Path) -> Result<UnrolledParams> {
    Ok(decode_checkpoint(&read_file(path)?)?.0)
}
