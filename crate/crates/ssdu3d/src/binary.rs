//! Little-endian primitives shared by the file formats.

use ssdu3d_core::{Cplx, Real};

use crate::error::{Error, Result};

/// On-disk name of the complex element type for the current build.
#[cfg(not(feature = "f32"))]
pub const COMPLEX_DTYPE: &str = "complex128";
#[cfg(feature = "f32")]
pub const COMPLEX_DTYPE: &str = "complex64";

/// On-disk name of the real element type for the current build.
#[cfg(not(feature = "f32"))]
pub const REAL_DTYPE: &str = "float64";
#[cfg(feature = "f32")]
pub const REAL_DTYPE: &str = "float32";

pub const REAL_BYTES: usize = std::mem::size_of::<Real>();

pub fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_reals(out: &mut Vec<u8>, v: &[Real]) {
    out.reserve(v.len() * REAL_BYTES);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn put_complex(out: &mut Vec<u8>, v: &[Cplx]) {
    out.reserve(v.len() * 2 * REAL_BYTES);
    for c in v {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
}

/// Bit-packed booleans, least significant bit first.
pub fn put_bits(out: &mut Vec<u8>, bits: &[bool]) {
    for chunk in bits.chunks(8) {
        out.push(chunk.iter().enumerate().fold(0u8, |b, (i, &v)| b | ((v as u8) << i)));
    }
}

/// Bounds-checked cursor over a byte slice.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format(format!(
                "{} truncated: needed {n} bytes at offset {}, {} left",
                self.what,
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("length checked")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("length checked")))
    }

    pub fn reals(&mut self, n: usize) -> Result<Vec<Real>> {
        let bytes = self.take(n.checked_mul(REAL_BYTES).ok_or_else(|| Error::format("tensor length overflow"))?)?;
        Ok(bytes.chunks_exact(REAL_BYTES).map(|b| Real::from_le_bytes(b.try_into().expect("chunk size"))).collect())
    }

    pub fn complex(&mut self, n: usize) -> Result<Vec<Cplx>> {
        let r = self.reals(n.checked_mul(2).ok_or_else(|| Error::format("tensor length overflow"))?)?;
        Ok(r.chunks_exact(2).map(|p| Cplx::new(p[0], p[1])).collect())
    }

    pub fn bits(&mut self, n: usize) -> Result<Vec<bool>> {
        let bytes = self.take(n.div_ceil(8))?;
        Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
    }
}

/// Check a magic prefix, naming the format in the error.
pub fn expect_magic(r: &mut Reader<'_>, magic: &[u8], format: &str) -> Result<()> {
    let got = r.take(magic.len()).map_err(|_| Error::format(format!("not a {format} file (too short)")))?;
    if got != magic {
        return Err(Error::format(format!("not a {format} file (bad magic)")));
    }
    Ok(())
}

/// Reject files written with a different scalar width.
pub fn expect_dtype(got: &str, want: &str) -> Result<()> {
    if got != want {
        return Err(Error::format(format!("file stores {got} but this build reads {want}")));
    }
    Ok(())
}
