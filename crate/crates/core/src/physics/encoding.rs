use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{bail, Result};
use crate::physics::CoilSet;
use crate::sampling::SamplingMask;
use crate::tensor::{ComplexVolume, Dims, Fft3, LinearMap};
use crate::{Cplx, Real};

/// Per-coil k-space, one volume per receiver.
pub type CoilKspace = Vec<ComplexVolume>;

/// Multi-coil encoding `E = M F S`: coil weighting, centered unitary 3D
/// DFT, then sampling.
///
/// The coil set is shared so that operators for `Ω`, `Θ`, `Λ` and the fully
/// sampled grid can coexist cheaply via [`EncodingOperator::with_mask`].
#[derive(Clone, Debug)]
pub struct EncodingOperator {
    coils: Arc<CoilSet>,
    mask: SamplingMask,
    fft: Arc<Fft3>,
}

impl EncodingOperator {
    pub fn new(coils: Arc<CoilSet>, mask: SamplingMask) -> Result<Self> {
        if coils.dims() != mask.dims() {
            bail!(Argument, "coil dims {} differ from mask dims {}", coils.dims(), mask.dims());
        }
        let fft = Arc::new(Fft3::new(mask.dims())?);
        Ok(Self { coils, mask, fft })
    }

    /// Same coils and FFT plans, different sampling pattern.
    pub fn with_mask(&self, mask: SamplingMask) -> Result<Self> {
        if mask.dims() != self.dims() {
            bail!(Argument, "mask dims {} differ from operator dims {}", mask.dims(), self.dims());
        }
        Ok(Self { coils: self.coils.clone(), mask, fft: self.fft.clone() })
    }

    pub fn dims(&self) -> Dims {
        self.mask.dims()
    }

    pub fn n_coils(&self) -> usize {
        self.coils.n_coils()
    }

    pub fn coils(&self) -> &Arc<CoilSet> {
        &self.coils
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    fn apply_mask(&self, k: &mut ComplexVolume) {
        for (v, &b) in k.data_mut().iter_mut().zip(self.mask.bits()) {
            if !b {
                *v = Cplx::zero();
            }
        }
    }

    fn encode_coil(&self, c: usize, x: &ComplexVolume) -> ComplexVolume {
        let mut k = self.coils.maps()[c].mul(x);
        self.fft.forward(&mut k);
        self.apply_mask(&mut k);
        k
    }

    /// `y_c = M F (s_c ⊙ x)` for every coil; entries off the mask are zero.
    pub fn encode(&self, x: &ComplexVolume) -> Result<CoilKspace> {
        if x.dims() != self.dims() {
            bail!(Argument, "image dims {} differ from operator dims {}", x.dims(), self.dims());
        }
        Ok((0..self.n_coils()).map(|c| self.encode_coil(c, x)).collect())
    }

    /// `Σ_c conj(s_c) ⊙ F⁻¹ (M y_c)`
    pub fn adjoint(&self, y: &[ComplexVolume]) -> Result<ComplexVolume> {
        if y.len() != self.n_coils() {
            bail!(Argument, "{} k-space coils for a {}-coil operator", y.len(), self.n_coils());
        }
        if let Some(bad) = y.iter().find(|k| k.dims() != self.dims()) {
            bail!(Argument, "k-space dims {} differ from operator dims {}", bad.dims(), self.dims());
        }
        let mut out = ComplexVolume::zeros(self.dims());
        for (c, yc) in y.iter().enumerate() {
            let mut k = yc.clone();
            self.apply_mask(&mut k);
            self.fft.inverse(&mut k);
            accumulate_conj_product(&mut out, &self.coils.maps()[c], &k);
        }
        Ok(out)
    }

    /// Normal operator `EᴴE x`, computed coil by coil.
    pub fn normal(&self, x: &ComplexVolume) -> Result<ComplexVolume> {
        if x.dims() != self.dims() {
            bail!(Argument, "image dims {} differ from operator dims {}", x.dims(), self.dims());
        }
        let mut out = ComplexVolume::zeros(self.dims());
        for c in 0..self.n_coils() {
            let mut k = self.encode_coil(c, x);
            self.fft.inverse(&mut k);
            accumulate_conj_product(&mut out, &self.coils.maps()[c], &k);
        }
        Ok(out)
    }

    /// Largest eigenvalue of `EᴴE`, estimated by power iteration from a
    /// fixed deterministic start.
    pub fn normal_norm_estimate(&self, iters: usize) -> Result<Real> {
        let n = self.dims().len();
        let mut v = ComplexVolume::from_fn(self.dims(), |x, y, z| {
            let h = (x * 73856093) ^ (y * 19349663) ^ (z * 83492791);
            Cplx::new(1.0 + (h % 7) as Real / 7.0, (h % 5) as Real / 5.0)
        });
        let norm = v.norm();
        v.scale_mut(1.0 / norm);
        let mut lambda = 0.0;
        for _ in 0..iters.max(1) {
            let w = self.normal(&v)?;
            lambda = w.norm();
            if lambda == 0.0 || n == 0 {
                return Ok(0.0);
            }
            v = w.scale(1.0 / lambda);
        }
        Ok(lambda)
    }
}

fn accumulate_conj_product(out: &mut ComplexVolume, map: &ComplexVolume, k: &ComplexVolume) {
    for ((o, s), v) in out.data_mut().iter_mut().zip(map.data()).zip(k.data()) {
        *o += s.conj() * v;
    }
}

/// Stack per-coil volumes into one planar buffer `[coil][re | im]`.
pub fn coils_to_planar(k: &[ComplexVolume]) -> Vec<Real> {
    let mut out = Vec::new();
    for v in k {
        out.extend_from_slice(&v.to_planar());
    }
    out
}

pub fn coils_from_planar(dims: Dims, buf: &[Real]) -> Result<CoilKspace> {
    let n = 2 * dims.len();
    if n == 0 || buf.len() % n != 0 {
        bail!(Argument, "{} reals is not a whole number of {dims} coil volumes", buf.len());
    }
    buf.chunks(n).map(|c| ComplexVolume::from_planar(dims, c)).collect()
}

/// `E` as a real-linear map on planar buffers, for the autodiff tape.
pub struct EncodeMap(pub Arc<EncodingOperator>);

impl LinearMap for EncodeMap {
    fn input_len(&self) -> usize {
        2 * self.0.dims().len()
    }

    fn output_len(&self) -> usize {
        2 * self.0.dims().len() * self.0.n_coils()
    }

    fn apply(&self, x: &[Real], out: &mut [Real]) {
        let d = self.0.dims();
        let x = ComplexVolume::from_planar(d, x).expect("planar length checked by the tape");
        let n = 2 * d.len();
        for c in 0..self.0.n_coils() {
            self.0.encode_coil(c, &x).write_planar(&mut out[c * n..(c + 1) * n]);
        }
    }

    fn apply_transpose(&self, y: &[Real], out: &mut [Real]) {
        let d = self.0.dims();
        let y = coils_from_planar(d, y).expect("planar length checked by the tape");
        self.0.adjoint(&y).expect("coil count matches").write_planar(out);
    }
}

/// `EᴴE` as a self-adjoint real-linear map on planar buffers.
pub struct NormalMap(pub Arc<EncodingOperator>);

impl LinearMap for NormalMap {
    fn input_len(&self) -> usize {
        2 * self.0.dims().len()
    }

    fn output_len(&self) -> usize {
        2 * self.0.dims().len()
    }

    fn apply(&self, x: &[Real], out: &mut [Real]) {
        let d = self.0.dims();
        let x = ComplexVolume::from_planar(d, x).expect("planar length checked by the tape");
        self.0.normal(&x).expect("dims match").write_planar(out);
    }

    fn apply_transpose(&self, y: &[Real], out: &mut [Real]) {
        self.apply(y, out);
    }
}
