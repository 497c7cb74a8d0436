//! Synthetic cardiac-like phantom, coil profiles and noisy acquisitions.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::physics::{CoilKspace, CoilSet, EncodingOperator};
use crate::prelude::*;
use crate::sampling::SamplingMask;
use crate::tensor::{ComplexVolume, Dims};
use crate::seeded_rng;

mod subject;
pub use subject::{calibrate_coils, derive_seed, simulate_subject, Retrospective, Subject, SubjectSpec};

/// Smallest extent per axis the phantom generator accepts.
pub const MIN_PHANTOM_EXTENT: usize = 8;

/// Inclusive intensity range `[lo, hi]`.
pub type Range2 = [Real; 2];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PhantomSpec {
    pub dims: Dims,
    /// Torso, myocardium, blood pool and scar come first; anything beyond
    /// four adds small random background structures.
    pub n_ellipsoids: usize,
    pub background: Range2,
    pub myocardium: Range2,
    pub blood_pool: Range2,
    /// Added to the myocardium intensity inside the lesion.
    pub scar_boost: Real,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: Dims::new(32, 64, 48),
            n_ellipsoids: 8,
            background: [0.25, 0.35],
            myocardium: [0.3, 0.4],
            blood_pool: [0.7, 0.9],
            scar_boost: 0.3,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.dims.validate()?;
        if d.nx < MIN_PHANTOM_EXTENT || d.ny < MIN_PHANTOM_EXTENT || d.nz < MIN_PHANTOM_EXTENT {
            bail!(Argument, "phantom needs at least {MIN_PHANTOM_EXTENT} voxels per axis, got {d}");
        }
        for r in [self.background, self.myocardium, self.blood_pool] {
            if !(0.0 <= r[0] && r[0] <= r[1] && r[1] <= 1.0) {
                bail!(Argument, "intensity range {r:?} must satisfy 0 <= lo <= hi <= 1");
            }
        }
        if !(0.0..=1.0).contains(&self.scar_boost) {
            bail!(Argument, "scar boost must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Ellipsoid in normalized coordinates (each axis spans `[-1, 1)`).
#[derive(Clone, Copy, Debug)]
struct Ellipsoid {
    center: [Real; 3],
    radii: [Real; 3],
    /// Rotation in the plane of axes 1 and 2.
    angle: Real,
    intensity: Real,
}

/// Width of the smooth rim as a fraction of the normalized radius.
const EDGE: Real = 0.15;

impl Ellipsoid {
    /// Compactly supported weight: 1 well inside, 0 outside, raised-cosine rim.
    fn weight(&self, p: [Real; 3]) -> Real {
        let (s, c) = self.angle.sin_cos();
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let q = [d[0], c * d[1] + s * d[2], -s * d[1] + c * d[2]];
        let r = ((q[0] / self.radii[0]).powi(2) + (q[1] / self.radii[1]).powi(2) + (q[2] / self.radii[2]).powi(2)).sqrt();
        if r >= 1.0 {
            0.0
        } else if r <= 1.0 - EDGE {
            1.0
        } else {
            let t = (r - (1.0 - EDGE)) / EDGE;
            0.5 * (1.0 + (core::f64::consts::PI as Real * t).cos())
        }
    }
}

fn normalized(i: usize, n: usize) -> Real {
    (i as Real - (n / 2) as Real) / (n as Real / 2.0)
}

fn uniform(rng: &mut impl Rng, r: Range2) -> Real {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

fn layout(spec: &PhantomSpec, rng: &mut impl Rng) -> Vec<Ellipsoid> {
    let mut jitter = |scale: Real| rng.random_range(-scale..=scale);
    let torso = Ellipsoid {
        center: [jitter(0.05), jitter(0.05), jitter(0.05)],
        radii: [0.85 + jitter(0.05), 0.8 + jitter(0.05), 0.7 + jitter(0.05)],
        angle: jitter(0.2),
        intensity: 0.0,
    };
    let heart_c = [jitter(0.05), 0.15 + jitter(0.08), -0.1 + jitter(0.08)];
    let heart_r = [0.5 + jitter(0.05), 0.33 + jitter(0.03), 0.3 + jitter(0.03)];
    let angle = jitter(0.5);
    let myo = Ellipsoid { center: heart_c, radii: heart_r, angle, intensity: 0.0 };
    let pool = Ellipsoid { center: heart_c, radii: [heart_r[0] * 0.8, heart_r[1] * 0.6, heart_r[2] * 0.6], angle, intensity: 0.0 };
    // lesion straddling the myocardial wall on the axis-1 side
    let wall = heart_r[1] * 0.8;
    let (s, c) = angle.sin_cos();
    let scar = Ellipsoid {
        center: [heart_c[0] + jitter(0.1), heart_c[1] + c * wall, heart_c[2] + s * wall],
        radii: [0.15, 0.08, 0.1],
        angle,
        intensity: 0.0,
    };
    let mut out = alloc::vec![torso, myo, pool, scar];
    out[0].intensity = uniform(rng, spec.background);
    out[1].intensity = uniform(rng, spec.myocardium);
    out[2].intensity = uniform(rng, spec.blood_pool);
    out[3].intensity = (out[1].intensity + spec.scar_boost).min(1.0);
    while out.len() < spec.n_ellipsoids {
        let e = Ellipsoid {
            center: [rng.random_range(-0.5..0.5), rng.random_range(-0.6..-0.1), rng.random_range(-0.5..0.5)],
            radii: [rng.random_range(0.08..0.25), rng.random_range(0.05..0.15), rng.random_range(0.05..0.15)],
            angle: rng.random_range(-1.0..1.0),
            intensity: uniform(rng, [0.05, 0.6]),
        };
        out.push(e);
    }
    out.truncate(spec.n_ellipsoids);
    out
}

/// Ground-truth complex image.
///
/// Ellipsoids are painted in order, each blending its intensity over what
/// lies beneath with its smooth weight, so magnitudes stay within the
/// intensity ranges. A low-order smooth phase is applied at the end.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<ComplexVolume> {
    spec.validate()?;
    let d = spec.dims;
    if spec.n_ellipsoids == 0 {
        return Ok(ComplexVolume::zeros(d));
    }
    let mut rng = seeded_rng(spec.seed);
    let shapes = layout(spec, &mut rng);
    let phase_c: [Real; 4] = core::array::from_fn(|_| rng.random_range(-0.4..0.4));
    Ok(ComplexVolume::from_fn(d, |x, y, z| {
        let p = [normalized(x, d.nx), normalized(y, d.ny), normalized(z, d.nz)];
        let mut m: Real = 0.0;
        for e in &shapes {
            let w = e.weight(p);
            if w > 0.0 {
                m = m * (1.0 - w) + e.intensity * w;
            }
        }
        let phase = phase_c[0] + phase_c[1] * p[0] + phase_c[2] * p[1] + phase_c[3] * p[1] * p[2];
        Cplx::from_polar(m, phase)
    }))
}

/// Smooth receive profiles placed around the volume in the plane of axes 1
/// and 2, each a Gaussian times a first-order complex polynomial,
/// RSS-normalized.
pub fn generate_coils(dims: Dims, n_coils: usize, seed: u64) -> Result<CoilSet> {
    let d = dims.validate()?;
    if n_coils == 0 {
        bail!(Argument, "at least one coil is required");
    }
    let mut rng = seeded_rng(seed);
    let tau = 2.0 * core::f64::consts::PI as Real;
    let mut maps = Vec::with_capacity(n_coils);
    for c in 0..n_coils {
        let theta = tau * c as Real / n_coils as Real + rng.random_range(-0.2..0.2);
        let center = [rng.random_range(-0.5..0.5), 1.3 * theta.cos(), 1.3 * theta.sin()];
        let width = rng.random_range(0.8..1.1);
        let poly: [Cplx; 3] = core::array::from_fn(|_| Cplx::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)));
        let phase0 = rng.random_range(-3.0..3.0);
        maps.push(ComplexVolume::from_fn(d, |x, y, z| {
            let p = [normalized(x, d.nx), normalized(y, d.ny), normalized(z, d.nz)];
            let r2: Real = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
            let g = (-r2 / (2.0 * width * width)).exp();
            let lin = Cplx::new(1.0, 0.0) + poly[0] * p[0] + poly[1] * p[1] + poly[2] * p[2];
            lin * Cplx::from_polar(g, phase0)
        }));
    }
    CoilSet::rss_normalized(maps)
}

/// Acquisition parameters for one simulated subject.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AcquisitionSpec {
    pub n_coils: usize,
    /// Noise std relative to the peak magnitude of the truth image.
    pub noise_sigma: Real,
    pub rate: Real,
    pub acs: (usize, usize),
    pub readout_axis: usize,
    pub seed: u64,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self { n_coils: 8, noise_sigma: 0.01, rate: 3.0, acs: (10, 6), readout_axis: 0, seed: 0 }
    }
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_coils == 0 {
            bail!(Argument, "at least one coil is required");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            bail!(Argument, "noise sigma must be non-negative, got {}", self.noise_sigma);
        }
        if self.readout_axis > 2 {
            bail!(Argument, "readout axis must be 0, 1 or 2");
        }
        Ok(())
    }
}

/// `mask ⊙ (F S truth + n)` per coil.
///
/// The noise is i.i.d. circular complex Gaussian with standard deviation
/// `noise_sigma · max|truth|` (real and imaginary parts each carry half
/// the variance). It is drawn at every location whether sampled or not, so
/// a given seed always produces the same noise field.
pub fn simulate_acquisition(
    truth: &ComplexVolume,
    coils: &CoilSet,
    mask: &SamplingMask,
    noise_sigma: Real,
    seed: u64,
) -> Result<CoilKspace> {
    if truth.dims() != mask.dims() {
        bail!(Argument, "truth dims {} differ from mask dims {}", truth.dims(), mask.dims());
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        bail!(Argument, "noise sigma must be non-negative, got {noise_sigma}");
    }
    let op = EncodingOperator::new(alloc::sync::Arc::new(coils.clone()), mask.clone())?;
    let mut k = op.encode(truth)?;
    if noise_sigma == 0.0 {
        return Ok(k);
    }
    // the FFT is unitary, so this is also the per-voxel image-domain noise
    let std = noise_sigma * truth.max_abs() / Real::sqrt(2.0);
    let mut rng = seeded_rng(seed);
    for coil in k.iter_mut() {
        for (v, &b) in coil.data_mut().iter_mut().zip(mask.bits()) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if b {
                *v += Cplx::new(std * re as Real, std * im as Real);
            }
        }
    }
    Ok(k)
}
