//! Training-set container.
//!
//! Layout: magic `SSDU3D\0`, `u16` format version, `u32` header length, a
//! JSON [`DatasetHeader`], then one record per sample. A record holds the
//! `Ω`, `Θ` and `Λ` bitsets, the per-coil k-space, the coil maps and the
//! optional ground truth, all little-endian, followed by the CRC32 of the
//! record bytes. Record offsets in the header are relative to the first
//! byte after the header.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use ssdu3d_core::physics::CoilSet;
use ssdu3d_core::sample::TrainingSample;
use ssdu3d_core::sampling::{MaskSplit, SamplingMask};
use ssdu3d_core::{ComplexVolume, Dims, Real};

use crate::binary::{expect_dtype, expect_magic, put_bits, put_complex, put_u16, put_u32, Reader, COMPLEX_DTYPE};
use crate::config::SimulationConfig;
use crate::error::{read_file, write_file, Error, Result};

pub const DATASET_MAGIC: &[u8; 7] = b"SSDU3D\0";
pub const DATASET_VERSION: u16 = 1;

/// Provenance of a dataset: how it was simulated and from which seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub subjects: Vec<u32>,
    pub simulation: Option<SimulationConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub subject_id: u32,
    pub slab_index: u32,
    pub dims: Dims,
    pub n_coils: usize,
    pub readout_axis: usize,
    pub acs: (usize, usize),
    pub theta_acs: (usize, usize),
    pub lam_acs: (usize, usize),
    /// Acceleration of `Ω` over the phase-encoding plane.
    pub rate: Real,
    pub scale: Real,
    pub has_ground_truth: bool,
    pub offset: u64,
    /// Record length in bytes, excluding the trailing CRC.
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u16,
    pub dtype: String,
    pub meta: DatasetMeta,
    pub samples: Vec<SampleEntry>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<TrainingSample>,
}

fn encode_record(s: &TrainingSample) -> Vec<u8> {
    let mut out = Vec::new();
    put_bits(&mut out, s.mask.bits());
    put_bits(&mut out, s.split.theta.bits());
    put_bits(&mut out, s.split.lam.bits());
    for k in &s.kspace {
        put_complex(&mut out, k.data());
    }
    for m in s.coils.maps() {
        put_complex(&mut out, m.data());
    }
    if let Some(g) = &s.ground_truth {
        put_complex(&mut out, g.data());
    }
    out
}

fn decode_record(bytes: &[u8], e: &SampleEntry) -> Result<TrainingSample> {
    let n = e.dims.validate()?.len();
    let mut r = Reader::new(bytes, "dataset record");
    let omega = SamplingMask::from_bits(e.dims, r.bits(n)?, e.acs, e.readout_axis)?;
    let theta = SamplingMask::from_bits(e.dims, r.bits(n)?, e.theta_acs, e.readout_axis)?;
    let lam = SamplingMask::from_bits(e.dims, r.bits(n)?, e.lam_acs, e.readout_axis)?;
    let volume = |r: &mut Reader<'_>| -> Result<ComplexVolume> { Ok(ComplexVolume::from_vec(e.dims, r.complex(n)?)?) };
    let kspace = (0..e.n_coils).map(|_| volume(&mut r)).collect::<Result<Vec<_>>>()?;
    let maps = (0..e.n_coils).map(|_| volume(&mut r)).collect::<Result<Vec<_>>>()?;
    let ground_truth = if e.has_ground_truth { Some(volume(&mut r)?) } else { None };
    if r.remaining() != 0 {
        return Err(Error::format(format!("record for subject {} slab {} has {} trailing bytes", e.subject_id, e.slab_index, r.remaining())));
    }
    Ok(TrainingSample::new(
        kspace,
        Arc::new(CoilSet::new(maps)?),
        omega,
        MaskSplit { theta, lam },
        ground_truth,
        e.subject_id,
        e.slab_index,
        e.scale,
    )?)
}

/// Serialize `ds` into the container format.
pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    let mut entries = Vec::with_capacity(ds.samples.len());
    for s in &ds.samples {
        let rec = encode_record(s);
        entries.push(SampleEntry {
            subject_id: s.subject_id,
            slab_index: s.slab_index,
            dims: s.mask.dims(),
            n_coils: s.coils.n_coils(),
            readout_axis: s.mask.readout_axis(),
            acs: s.mask.acs(),
            theta_acs: s.split.theta.acs(),
            lam_acs: s.split.lam.acs(),
            rate: 1.0 / s.mask.plane_fraction(),
            scale: s.scale,
            has_ground_truth: s.ground_truth.is_some(),
            offset: body.len() as u64,
            length: rec.len() as u64,
        });
        let crc = crc32fast::hash(&rec);
        body.extend_from_slice(&rec);
        put_u32(&mut body, crc);
    }
    let header = DatasetHeader { version: DATASET_VERSION, dtype: COMPLEX_DTYPE.into(), meta: ds.meta.clone(), samples: entries };
    let json = serde_json::to_vec(&header).map_err(|e| Error::format(format!("dataset header: {e}")))?;
    let mut out = Vec::with_capacity(DATASET_MAGIC.len() + 6 + json.len() + body.len());
    out.extend_from_slice(DATASET_MAGIC);
    put_u16(&mut out, DATASET_VERSION);
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Parse just the header of a dataset file.
pub fn decode_header(bytes: &[u8]) -> Result<(DatasetHeader, usize)> {
    let mut r = Reader::new(bytes, "dataset");
    expect_magic(&mut r, DATASET_MAGIC, "dataset")?;
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(Error::format(format!("dataset format version {version}, expected {DATASET_VERSION}")));
    }
    let len = r.u32()? as usize;
    let header: DatasetHeader =
        serde_json::from_slice(r.take(len)?).map_err(|e| Error::format(format!("dataset header: {e}")))?;
    if header.version != version {
        return Err(Error::format("dataset header version disagrees with the file prefix"));
    }
    expect_dtype(&header.dtype, COMPLEX_DTYPE)?;
    Ok((header, r.position()))
}

/// Parse a full dataset, verifying every record checksum. Fails as a whole.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let (header, body_start) = decode_header(bytes)?;
    let body = &bytes[body_start..];
    let mut samples = Vec::with_capacity(header.samples.len());
    for (i, e) in header.samples.iter().enumerate() {
        let start = usize::try_from(e.offset).map_err(|_| Error::format("record offset overflow"))?;
        let len = usize::try_from(e.length).map_err(|_| Error::format("record length overflow"))?;
        let end = start.checked_add(len).and_then(|v| v.checked_add(4)).ok_or_else(|| Error::format("record bounds overflow"))?;
        if end > body.len() {
            return Err(Error::format(format!("dataset truncated: record {i} needs {end} bytes, file body has {}", body.len())));
        }
        let rec = &body[start..start + len];
        let stored = u32::from_le_bytes(body[start + len..end].try_into().expect("4 bytes"));
        if crc32fast::hash(rec) != stored {
            return Err(Error::format(format!("checksum mismatch in record {i} (subject {}, slab {})", e.subject_id, e.slab_index)));
        }
        samples.push(decode_record(rec, e)?);
    }
    Ok(Dataset { meta: header.meta, samples })
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_file(path, &encode_dataset(ds)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read_file(path)?)
}
