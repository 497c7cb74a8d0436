use alloc::vec::Vec;

use crate::prelude::*;
use rand::Rng;

use crate::error::{bail, Result};
use crate::sampling::SamplingMask;
use crate::seeded_rng;

/// Which subset receives the Gaussian-weighted draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WeightedSet {
    /// `Λ` is drawn center-heavy; `Θ` is the remainder.
    #[default]
    Lambda,
    /// `Θ` is drawn center-heavy; `Λ` is the remainder.
    Theta,
}

/// Parameters for the self-supervised `Θ`/`Λ` split.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SplitConfig {
    /// Fraction of eligible samples assigned to `Λ`.
    pub rho: Real,
    /// Gaussian standard deviations in index units; `None` means a quarter
    /// of each extent.
    pub sigma: Option<[Real; 3]>,
    /// Keep the ACS block out of `Λ`.
    pub keep_acs_in_theta: bool,
    pub weighted: WeightedSet,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { rho: 0.4, sigma: None, keep_acs_in_theta: true, weighted: WeightedSet::Lambda, seed: 0 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            bail!(Argument, "rho must lie in (0, 1), got {}", self.rho);
        }
        if let Some(s) = self.sigma {
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                bail!(Argument, "Gaussian sigmas must be positive, got {s:?}");
            }
        }
        Ok(())
    }
}

/// Disjoint partition `Θ ∪ Λ = Ω` of the acquired samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSplit {
    pub theta: SamplingMask,
    pub lam: SamplingMask,
}

impl MaskSplit {
    /// Check disjointness, coverage of `omega`, and a nonempty `Λ`.
    pub fn validate(&self, omega: &SamplingMask) -> Result<()> {
        let (t, l, o) = (self.theta.bits(), self.lam.bits(), omega.bits());
        if t.len() != o.len() || l.len() != o.len() {
            bail!(Argument, "split masks do not match the acquisition grid");
        }
        if t.iter().zip(l).any(|(&a, &b)| a && b) {
            bail!(Argument, "Θ and Λ overlap");
        }
        if t.iter().zip(l).zip(o).any(|((&a, &b), &w)| (a || b) != w) {
            bail!(Argument, "Θ ∪ Λ differs from Ω");
        }
        if !l.iter().any(|&b| b) {
            bail!(Argument, "Λ is empty");
        }
        Ok(())
    }

    pub fn omega_bits(&self) -> Vec<bool> {
        self.theta.or(&self.lam)
    }
}

/// `⌈rho·n⌉`, robust to `rho·n` landing a rounding error above an integer.
pub fn lambda_count(rho: Real, n: usize) -> usize {
    let t = rho * n as Real;
    let r = t.round();
    if (t - r).abs() < 1e-9 * t.max(1.0) {
        r as usize
    } else {
        t.ceil() as usize
    }
}

/// Uniform draw strictly inside (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Split `mask` into `Θ` and `Λ`.
///
/// The weighted subset is drawn without replacement with probability
/// proportional to a 3D Gaussian centered on the k-space center, using
/// Gumbel-top-k keys so the subset size is exact.
pub fn split_gaussian(mask: &SamplingMask, cfg: &SplitConfig) -> Result<MaskSplit> {
    cfg.validate()?;
    let dims = mask.dims();
    let eligible: Vec<usize> = (0..dims.len())
        .filter(|&i| mask.get(i) && !(cfg.keep_acs_in_theta && mask.in_acs(i)))
        .collect();
    if eligible.len() < 2 {
        bail!(Argument, "split needs at least 2 eligible samples, found {}", eligible.len());
    }
    let n_lambda = lambda_count(cfg.rho, eligible.len());
    if n_lambda >= mask.count() || n_lambda == 0 {
        bail!(Argument, "rho={} leaves Θ empty ({n_lambda} of {} samples)", cfg.rho, mask.count());
    }
    let n = dims.as_array();
    let sigma = cfg.sigma.unwrap_or([n[0] as Real / 4.0, n[1] as Real / 4.0, n[2] as Real / 4.0]);
    let center = [(n[0] / 2) as Real, (n[1] / 2) as Real, (n[2] / 2) as Real];

    let mut rng = seeded_rng(cfg.seed);
    let mut keyed: Vec<(f64, usize)> = eligible
        .iter()
        .map(|&i| {
            let (x, y, z) = dims.coords(i);
            let d = [x as Real, y as Real, z as Real];
            let log_w: Real = (0..3).map(|a| -0.5 * ((d[a] - center[a]) / sigma[a]).powi(2)).sum();
            let gumbel = -(-open_unit(&mut rng).ln()).ln();
            (log_w as f64 + gumbel, i)
        })
        .collect();
    let n_weighted = match cfg.weighted {
        WeightedSet::Lambda => n_lambda,
        WeightedSet::Theta => eligible.len() - n_lambda,
    };
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut lam = alloc::vec![false; dims.len()];
    match cfg.weighted {
        WeightedSet::Lambda => keyed[..n_weighted].iter().for_each(|&(_, i)| lam[i] = true),
        WeightedSet::Theta => keyed[n_weighted..].iter().for_each(|&(_, i)| lam[i] = true),
    }
    let theta: Vec<bool> = mask.bits().iter().zip(&lam).map(|(&o, &l)| o && !l).collect();
    let theta_acs = if cfg.keep_acs_in_theta { mask.acs() } else { (0, 0) };
    let split = MaskSplit {
        theta: SamplingMask::from_bits(dims, theta, theta_acs, mask.readout_axis())?,
        lam: SamplingMask::from_bits(dims, lam, (0, 0), mask.readout_axis())?,
    };
    split.validate(mask)?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::generate_mask;
    use crate::tensor::Dims;
    use alloc::vec;

    #[test]
    fn partition_holds_and_size_is_exact() {
        let m = generate_mask(Dims::new(6, 20, 16), 3.0, (4, 4), 0, 2).unwrap();
        let cfg = SplitConfig { seed: 3, ..Default::default() };
        let s = split_gaussian(&m, &cfg).unwrap();
        s.validate(&m).unwrap();
        let eligible = (0..m.dims().len()).filter(|&i| m.get(i) && !m.in_acs(i)).count();
        assert_eq!(s.lam.count(), lambda_count(0.4, eligible));
        // ACS stays in Θ
        assert!((0..m.dims().len()).all(|i| !m.in_acs(i) || s.theta.get(i)));
    }

    #[test]
    fn forty_percent_of_a_thousand() {
        let d = Dims::new(10, 10, 10);
        let m = SamplingMask::from_bits(d, vec![true; 1000], (0, 0), 0).unwrap();
        let s = split_gaussian(&m, &SplitConfig::default()).unwrap();
        assert_eq!(s.lam.count(), 400);
        assert_eq!(s.theta.count(), 600);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = generate_mask(Dims::new(4, 12, 12), 2.0, (2, 2), 0, 1).unwrap();
        let cfg = SplitConfig { seed: 11, ..Default::default() };
        assert_eq!(split_gaussian(&m, &cfg).unwrap(), split_gaussian(&m, &cfg).unwrap());
        let other = SplitConfig { seed: 12, ..Default::default() };
        assert_ne!(split_gaussian(&m, &cfg).unwrap(), split_gaussian(&m, &other).unwrap());
    }

    #[test]
    fn inverted_weighting_keeps_sizes() {
        let m = generate_mask(Dims::new(4, 12, 12), 2.0, (2, 2), 0, 1).unwrap();
        let cfg = SplitConfig { weighted: WeightedSet::Theta, ..Default::default() };
        let s = split_gaussian(&m, &cfg).unwrap();
        s.validate(&m).unwrap();
    }

    #[test]
    fn degenerate_configs_rejected() {
        let d = Dims::new(1, 2, 2);
        let one = SamplingMask::from_bits(d, vec![true, false, false, false], (0, 0), 0).unwrap();
        assert!(split_gaussian(&one, &SplitConfig::default()).is_err());
        let m = SamplingMask::from_bits(d, vec![true; 4], (0, 0), 0).unwrap();
        assert!(split_gaussian(&m, &SplitConfig { rho: 1.0, ..Default::default() }).is_err());
        assert!(split_gaussian(&m, &SplitConfig { rho: 0.9999, ..Default::default() }).is_err());
        assert!(split_gaussian(&m, &SplitConfig { sigma: Some([1.0, 0.0, 1.0]), ..Default::default() }).is_err());
    }

    #[test]
    fn narrow_gaussian_prefers_the_center() {
        let d = Dims::new(9, 9, 9);
        let m = SamplingMask::from_bits(d, vec![true; d.len()], (0, 0), 0).unwrap();
        let center = d.index(4, 4, 4);
        let corner = d.index(0, 0, 0);
        let (mut hits_c, mut hits_p) = (0, 0);
        for seed in 0..200 {
            let cfg = SplitConfig { rho: 0.2, sigma: Some([1.5; 3]), seed, ..Default::default() };
            let s = split_gaussian(&m, &cfg).unwrap();
            hits_c += s.lam.get(center) as u32;
            hits_p += s.lam.get(corner) as u32;
        }
        assert!(hits_c > 190 && hits_p < 10, "center {hits_c}, corner {hits_p}");
    }
}
