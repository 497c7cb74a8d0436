use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::net::{dc_solve, dc_solve_taped, CgConfig, DcProblem, NetConfig, ResNetParams, ResNetVars};
use crate::physics::{EncodingOperator, NormalMap};
use crate::prelude::*;
use crate::tensor::{ComplexVolume, Tape, Var};

/// Architecture of the unrolled network.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ModelConfig {
    pub net: NetConfig,
    /// Number of regularizer/data-consistency alternations `T`.
    pub unrolls: usize,
    pub cg: CgConfig,
    /// Initial penalty `μ`.
    pub mu_init: Real,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { net: NetConfig::default(), unrolls: 5, cg: CgConfig::default(), mu_init: 0.05 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.cg.validate()?;
        if self.unrolls == 0 {
            bail!(Argument, "at least one unroll is required");
        }
        if !(self.mu_init > 0.0 && self.mu_init.is_finite()) {
            bail!(Argument, "initial mu must be positive, got {}", self.mu_init);
        }
        Ok(())
    }
}

/// Name and shape of one trainable tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Every trainable quantity: the shared ResNet and `ν = ln μ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnrolledParams {
    pub config: ModelConfig,
    pub resnet: ResNetParams,
    pub log_mu: Real,
}

/// Tape handles for [`UnrolledParams`].
#[derive(Clone, Debug)]
pub struct UnrolledVars {
    pub resnet: ResNetVars,
    pub log_mu: Var,
}

impl UnrolledVars {
    /// Handles in [`UnrolledParams::groups`] order.
    pub fn all(&self) -> Vec<Var> {
        let mut v = self.resnet.all();
        v.push(self.log_mu);
        v
    }
}

impl UnrolledParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let resnet = ResNetParams::init(config.net.clone(), seed)?;
        Ok(Self { log_mu: config.mu_init.ln(), resnet, config })
    }

    /// Zero regularizer, `μ` at its initial value.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let resnet = ResNetParams::zeros(config.net.clone())?;
        Ok(Self { log_mu: config.mu_init.ln(), resnet, config })
    }

    pub fn mu(&self) -> Real {
        self.log_mu.exp()
    }

    pub fn set_mu(&mut self, mu: Real) -> Result<()> {
        if !(mu > 0.0 && mu.is_finite()) {
            bail!(Argument, "mu must be positive, got {mu}");
        }
        self.log_mu = mu.ln();
        Ok(())
    }

    pub fn groups_info(&self) -> Vec<ParamGroup> {
        let mut v = Vec::new();
        for (name, k) in self.resnet.kernels() {
            v.push(ParamGroup { name: format!("{name}.weight"), shape: vec![k.c_out, k.c_in, 3, 3, 3] });
            v.push(ParamGroup { name: format!("{name}.bias"), shape: vec![k.c_out] });
        }
        v.push(ParamGroup { name: String::from("log_mu"), shape: vec![1] });
        v
    }

    pub fn groups(&self) -> Vec<&[Real]> {
        let mut v: Vec<&[Real]> = Vec::new();
        for (_, k) in self.resnet.kernels() {
            v.push(&k.weight);
            v.push(&k.bias);
        }
        v.push(core::slice::from_ref(&self.log_mu));
        v
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [Real]> {
        let mut v: Vec<&mut [Real]> = Vec::new();
        for k in self.resnet.kernels_mut() {
            v.push(&mut k.weight);
            v.push(&mut k.bias);
        }
        v.push(core::slice::from_mut(&mut self.log_mu));
        v
    }

    pub fn n_parameters(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    pub fn register(&self, tape: &mut Tape) -> UnrolledVars {
        let resnet = self.resnet.register(tape);
        let log_mu = tape.param(vec![self.log_mu]);
        UnrolledVars { resnet, log_mu }
    }
}

/// `T` alternations of regularizer and CG data consistency, starting from
/// the zero-filled image `Eᴴy`.
pub fn unrolled_forward(y: &[ComplexVolume], op: &EncodingOperator, params: &UnrolledParams, unrolls: usize) -> Result<ComplexVolume> {
    if unrolls == 0 {
        bail!(Argument, "at least one unroll is required");
    }
    let rhs = op.adjoint(y)?;
    let mu = params.mu();
    let mut x = rhs.clone();
    for _ in 0..unrolls {
        let z = params.resnet.apply(&x)?;
        x = dc_solve(&DcProblem { rhs: &rhs, op, mu, z: &z, cg: params.config.cg.clone() })?.x;
    }
    Ok(x)
}

/// [`unrolled_forward`] recorded on `tape`; returns the planar output node.
pub fn unrolled_forward_taped(
    tape: &mut Tape,
    vars: &UnrolledVars,
    y: &[ComplexVolume],
    op: &Arc<EncodingOperator>,
    cg: &CgConfig,
    unrolls: usize,
) -> Result<Var> {
    if unrolls == 0 {
        bail!(Argument, "at least one unroll is required");
    }
    let dims = op.dims();
    let rhs = tape.constant(op.adjoint(y)?.to_planar());
    let mu = tape.exp(vars.log_mu);
    let normal = Arc::new(NormalMap(op.clone()));
    let mut x = rhs;
    for _ in 0..unrolls {
        let z = vars.resnet.apply(tape, x, dims)?;
        x = dc_solve_taped(tape, rhs, &normal, mu, z, cg)?;
    }
    Ok(x)
}
