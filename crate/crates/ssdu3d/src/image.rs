//! Reconstruction outputs: lossless complex dumps and magnitude PNGs.
//!
//! Raw layout: magic `SSDURAW\0`, `u32` header length, JSON [`RawHeader`],
//! then the complex volume as little-endian `(re, im)` pairs.

use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ssdu3d_core::{ComplexVolume, Dims};

use crate::binary::{expect_dtype, expect_magic, put_complex, put_u32, Reader, COMPLEX_DTYPE};
use crate::error::{read_file, write_file, Error, Result};

pub const RAW_MAGIC: &[u8; 8] = b"SSDURAW\0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: Dims,
    pub dtype: String,
    pub subject_id: u32,
    pub slab_index: u32,
    pub method: String,
}

pub fn encode_raw(v: &ComplexVolume, header: &RawHeader) -> Result<Vec<u8>> {
    if header.dims != v.dims() {
        return Err(Error::format("raw header dims disagree with the volume"));
    }
    let json = serde_json::to_vec(header).map_err(|e| Error::format(format!("raw header: {e}")))?;
    let mut out = Vec::with_capacity(12 + json.len() + v.len() * 16);
    out.extend_from_slice(RAW_MAGIC);
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    put_complex(&mut out, v.data());
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<(ComplexVolume, RawHeader)> {
    let mut r = Reader::new(bytes, "raw image");
    expect_magic(&mut r, RAW_MAGIC, "raw image")?;
    let len = r.u32()? as usize;
    let h: RawHeader = serde_json::from_slice(r.take(len)?).map_err(|e| Error::format(format!("raw header: {e}")))?;
    expect_dtype(&h.dtype, COMPLEX_DTYPE)?;
    let n = h.dims.validate()?.len();
    let data = r.complex(n)?;
    if r.remaining() != 0 {
        return Err(Error::format("raw image has trailing bytes"));
    }
    Ok((ComplexVolume::from_vec(h.dims, data)?, h))
}

pub fn save_raw(path: &Path, v: &ComplexVolume, header: &RawHeader) -> Result<()> {
    write_file(path, &encode_raw(v, header)?)
}

pub fn load_raw(path: &Path) -> Result<(ComplexVolume, RawHeader)> {
    decode_raw(&read_file(path)?)
}

/// Tile the magnitude of every slice along axis 0 into one 16-bit grayscale
/// image, scaled so the volume maximum maps to 65535.
pub fn magnitude_montage(v: &ComplexVolume) -> (u32, u32, Vec<u16>) {
    let d = v.dims();
    let cols = (d.nx as f64).sqrt().ceil() as usize;
    let rows = d.nx.div_ceil(cols);
    let (w, h) = (cols * d.nz, rows * d.ny);
    let peak = v.max_abs();
    let mut px = vec![0u16; w * h];
    for x in 0..d.nx {
        let (r, c) = (x / cols, x % cols);
        for y in 0..d.ny {
            for z in 0..d.nz {
                let m = if peak > 0.0 { v.get(x, y, z).norm() / peak } else { 0.0 };
                px[(r * d.ny + y) * w + c * d.nz + z] = (m.clamp(0.0, 1.0) * 65535.0).round() as u16;
            }
        }
    }
    (w as u32, h as u32, px)
}

pub fn save_png(path: &Path, v: &ComplexVolume) -> Result<()> {
    let (w, h, px) = magnitude_montage(v);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(to_io)?;
    let bytes: Vec<u8> = px.iter().flat_map(|p| p.to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(to_io)?;
    writer.finish().map_err(to_io)
}
