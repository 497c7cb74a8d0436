use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::physics::{EncodingOperator, NormalMap};
use crate::prelude::*;
use crate::tensor::{ComplexVolume, Tape, Var};

/// Inner conjugate-gradient budget.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CgConfig {
    pub iters: usize,
    /// Stop once `‖r‖ / ‖b‖` drops below this.
    pub tol: Real,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { iters: 10, tol: 1e-6 }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            bail!(Argument, "CG needs at least one iteration");
        }
        if !(self.tol >= 0.0) {
            bail!(Argument, "CG tolerance must be non-negative");
        }
        Ok(())
    }
}

/// `(EᴴE + μI) x = rhs + μ z`, solved from the starting point `z`.
pub struct DcProblem<'a> {
    /// `Eᴴ y`.
    pub rhs: &'a ComplexVolume,
    pub op: &'a EncodingOperator,
    pub mu: Real,
    pub z: &'a ComplexVolume,
    pub cg: CgConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcSolution {
    pub x: ComplexVolume,
    /// Relative residual before the first step and after each step.
    pub residuals: Vec<Real>,
}

impl DcSolution {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }

    pub fn final_residual(&self) -> Real {
        *self.residuals.last().expect("history holds the initial residual")
    }
}

fn check_inputs(rhs_ok: bool, z_ok: bool, mu: Real, cg: &CgConfig) -> Result<()> {
    cg.validate()?;
    if !(mu > 0.0 && mu.is_finite()) {
        bail!(Numeric, "penalty mu must be positive and finite, got {mu}");
    }
    if !rhs_ok || !z_ok {
        bail!(Numeric, "data-consistency inputs contain non-finite values");
    }
    Ok(())
}

/// Conjugate gradients on the penalized normal equations.
pub fn dc_solve(prob: &DcProblem<'_>) -> Result<DcSolution> {
    let DcProblem { rhs, op, mu, z, ref cg } = *prob;
    if rhs.dims() != op.dims() || z.dims() != op.dims() {
        bail!(Argument, "data-consistency images must match operator dims {}", op.dims());
    }
    check_inputs(rhs.is_finite(), z.is_finite(), mu, cg)?;
    let apply = |v: &ComplexVolume| -> Result<ComplexVolume> {
        let mut out = op.normal(v)?;
        out.axpy(Cplx::new(mu, 0.0), v);
        Ok(out)
    };
    let mut b = rhs.clone();
    b.axpy(Cplx::new(mu, 0.0), z);
    let b_norm = b.norm();

    let mut x = z.clone();
    let mut r = b.sub(&apply(&x)?);
    let mut rr = r.norm_sqr();
    let rel = |rr: Real| if b_norm > 0.0 { rr.sqrt() / b_norm } else { rr.sqrt() };
    let mut residuals = alloc::vec![rel(rr)];
    let mut p = r.clone();
    for _ in 0..cg.iters {
        if rr == 0.0 || rel(rr) < cg.tol {
            break;
        }
        let ap = apply(&p)?;
        let pap = p.dot(&ap).re;
        // exhausted search directions (only reachable once r has underflowed)
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x.axpy(Cplx::new(alpha, 0.0), &p);
        r.axpy(Cplx::new(-alpha, 0.0), &ap);
        let rr_new = r.norm_sqr();
        residuals.push(rel(rr_new));
        let beta = rr_new / rr;
        p = r.zip_map(&p, |ri, pi| ri + pi * beta);
        rr = rr_new;
    }
    if !x.is_finite() {
        bail!(Numeric, "CG produced non-finite values");
    }
    Ok(DcSolution { x, residuals })
}

/// The same iteration recorded on a tape so gradients flow to `z` and `mu`.
///
/// `rhs` and `z` are planar complex buffers; `mu` is a scalar node. The
/// number of steps is decided by the forward values exactly as in
/// [`dc_solve`].
pub fn dc_solve_taped(tape: &mut Tape, rhs: Var, normal: &Arc<NormalMap>, mu: Var, z: Var, cg: &CgConfig) -> Result<Var> {
    let mu_v = tape.scalar(mu);
    check_inputs(tape.value(rhs).iter().all(|v| v.is_finite()), tape.value(z).iter().all(|v| v.is_finite()), mu_v, cg)?;
    let b_norm = tape.value(rhs).iter().zip(tape.value(z)).map(|(r, z)| (r + mu_v * z).powi(2)).sum::<Real>().sqrt();
    let rel = |rr: Real| if b_norm > 0.0 { rr.sqrt() / b_norm } else { rr.sqrt() };
    let map: Arc<dyn crate::tensor::LinearMap> = normal.clone();

    let nz = tape.linear(z, map.clone())?;
    let mut r = tape.sub(rhs, nz)?;
    let mut rr = tape.dot(r, r)?;
    let mut x = z;
    let mut p = r;
    for _ in 0..cg.iters {
        let rr_v = tape.scalar(rr);
        if rr_v == 0.0 || rel(rr_v) < cg.tol {
            break;
        }
        let np = tape.linear(p, map.clone())?;
        let ap = tape.axpy(mu, p, np)?;
        let pap = tape.dot(p, ap)?;
        if !(tape.scalar(pap) > 0.0) {
            break;
        }
        let alpha = tape.div(rr, pap)?;
        x = tape.axpy(alpha, p, x)?;
        let neg_alpha = tape.scale(alpha, -1.0);
        r = tape.axpy(neg_alpha, ap, r)?;
        let rr_new = tape.dot(r, r)?;
        let beta = tape.div(rr_new, rr)?;
        p = tape.axpy(beta, p, r)?;
        rr = rr_new;
    }
    if tape.value(x).iter().any(|v| !v.is_finite()) {
        bail!(Numeric, "CG produced non-finite values");
    }
    Ok(x)
}
