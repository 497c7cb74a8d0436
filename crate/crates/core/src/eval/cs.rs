use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::physics::EncodingOperator;
use crate::prelude::*;
use crate::tensor::ComplexVolume;

use super::transform::{haar3d, ihaar3d, l1, soft_threshold, total_variation, tv_dual_zeros, tv_prox_warm, TvDual};

/// Consecutive objective increases that abort the solver.
pub const MAX_INCREASES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sparsity {
    /// Multi-level orthonormal Haar; every coefficient is penalized.
    Haar { levels: usize },
    /// Anisotropic finite differences, with an inner dual solver for the prox.
    TotalVariation { inner_iters: usize },
}

impl Default for Sparsity {
    fn default() -> Self {
        Sparsity::Haar { levels: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CsConfig {
    pub transform: Sparsity,
    pub lambda: Real,
    pub iterations: usize,
    /// Gradient step; `None` uses `0.95 / L` with `L` a power-iteration
    /// estimate of `‖EᴴE‖`.
    pub step: Option<Real>,
}

impl Default for CsConfig {
    fn default() -> Self {
        Self { transform: Sparsity::default(), lambda: 1e-3, iterations: 50, step: None }
    }
}

#[derive(Clone, Debug)]
pub struct CsResult {
    pub image: ComplexVolume,
    /// Objective after each iteration.
    pub objective: Vec<Real>,
}

/// `Eᴴy`.
pub fn zero_filled(y: &[ComplexVolume], op: &EncodingOperator) -> Result<ComplexVolume> {
    op.adjoint(y)
}

fn penalty(x: &ComplexVolume, t: Sparsity) -> Real {
    match t {
        Sparsity::Haar { levels } => l1(&haar3d(x, levels)),
        Sparsity::TotalVariation { .. } => total_variation(x),
    }
}

fn prox(v: &ComplexVolume, tau: Real, t: Sparsity, dual: &mut TvDual) -> ComplexVolume {
    match t {
        Sparsity::Haar { levels } => ihaar3d(&soft_threshold(&haar3d(v, levels), tau), levels),
        // the dual carries over between outer iterations
        Sparsity::TotalVariation { inner_iters } => tv_prox_warm(v, tau, inner_iters, dual),
    }
}

/// Objective `½‖Ex − y‖² + λ·R(x)`.
pub fn cs_objective(x: &ComplexVolume, y: &[ComplexVolume], op: &EncodingOperator, cfg: &CsConfig) -> Result<Real> {
    let r = op.encode(x)?;
    let fit: Real = r.iter().zip(y).map(|(a, b)| a.sub(b).norm_sqr()).sum();
    Ok(0.5 * fit + cfg.lambda * penalty(x, cfg.transform))
}

/// ISTA from zero: gradient step on the data term, then the prox of `λ·step·R`.
pub fn cs_recon(y: &[ComplexVolume], op: &EncodingOperator, cfg: &CsConfig) -> Result<CsResult> {
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        bail!(Argument, "lambda must be non-negative, got {}", cfg.lambda);
    }
    if cfg.iterations == 0 {
        bail!(Argument, "need at least one iteration");
    }
    match cfg.transform {
        Sparsity::Haar { levels: 0 } => bail!(Argument, "Haar transform needs at least one level"),
        Sparsity::TotalVariation { inner_iters: 0 } => bail!(Argument, "TV prox needs at least one inner iteration"),
        _ => {}
    }
    let step = match cfg.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => bail!(Argument, "step must be positive, got {s}"),
        None => {
            let l = op.normal_norm_estimate(30)?;
            if l <= 0.0 {
                bail!(Numeric, "operator norm estimate is zero");
            }
            0.95 / l
        }
    };

    let aty = op.adjoint(y)?;
    let mut x = ComplexVolume::zeros(op.dims());
    let mut objective = Vec::with_capacity(cfg.iterations);
    let mut prev = cs_objective(&x, y, op, cfg)?;
    let mut increases = 0;
    let mut dual = tv_dual_zeros(op.dims());
    for it in 0..cfg.iterations {
        let grad = op.normal(&x)?.sub(&aty);
        let mut v = x.clone();
        v.axpy(Cplx::new(-step, 0.0), &grad);
        x = prox(&v, cfg.lambda * step, cfg.transform, &mut dual);
        let f = cs_objective(&x, y, op, cfg)?;
        if !f.is_finite() {
            bail!(Numeric, "objective became non-finite at iteration {}", it + 1);
        }
        increases = if f > prev * (1.0 + 1e-12) { increases + 1 } else { 0 };
        if increases >= MAX_INCREASES {
            bail!(Divergence, "objective rose {MAX_INCREASES} iterations in a row (step {step} too large?)");
        }
        objective.push(f);
        prev = f;
    }
    Ok(CsResult { image: x, objective })
}
