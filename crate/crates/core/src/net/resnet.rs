use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::error::{bail, Result};
use crate::prelude::*;
use crate::seeded_rng;
use crate::tensor::conv::TAPS;
use crate::tensor::{conv3d, ComplexVolume, ConvKernel, Dims, RealTensor4, Tape, Var};

/// Width and depth of the regularizer.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NetConfig {
    pub n_blocks: usize,
    pub channels: usize,
    /// Multiplier on each residual branch before the skip-add.
    pub block_scale: Real,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { n_blocks: 8, channels: 32, block_scale: 0.1 }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            bail!(Argument, "network needs at least one channel");
        }
        if !self.block_scale.is_finite() {
            bail!(Argument, "block scale must be finite");
        }
        Ok(())
    }
}

/// Residual block: conv, ReLU, conv, scale, skip-add.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResBlock {
    pub conv1: ConvKernel,
    pub conv2: ConvKernel,
}

/// 3D ResNet mapping a complex image (as 2 real channels) to a correction.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResNetParams {
    pub config: NetConfig,
    pub input: ConvKernel,
    pub blocks: Vec<ResBlock>,
    pub output: ConvKernel,
}

/// Tape handles for one kernel.
#[derive(Clone, Copy, Debug)]
pub struct KernelVars {
    pub weight: Var,
    pub bias: Var,
    pub c_in: usize,
    pub c_out: usize,
}

/// Tape handles for every ResNet kernel.
#[derive(Clone, Debug)]
pub struct ResNetVars {
    pub input: KernelVars,
    pub blocks: Vec<[KernelVars; 2]>,
    pub output: KernelVars,
    pub block_scale: Real,
}

/// Smallest extent per axis the regularizer accepts.
pub const MIN_EXTENT: usize = 3;

fn check_dims(d: Dims) -> Result<()> {
    if d.nx < MIN_EXTENT || d.ny < MIN_EXTENT || d.nz < MIN_EXTENT {
        bail!(Argument, "regularizer needs at least {MIN_EXTENT} voxels per axis, got {d}");
    }
    Ok(())
}

impl ResNetParams {
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let blocks = (0..config.n_blocks)
            .map(|_| ResBlock { conv1: ConvKernel::zeros(c, c), conv2: ConvKernel::zeros(c, c) })
            .collect();
        Ok(Self { input: ConvKernel::zeros(c, 2), output: ConvKernel::zeros(2, c), blocks, config })
    }

    /// He-normal weights, zero biases. The output projection starts a
    /// hundred times smaller so the untrained network is close to the identity.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = seeded_rng(seed);
        let mut fill = |k: &mut ConvKernel, gain: Real| -> Result<()> {
            let std = gain * (2.0 / (k.c_in * TAPS) as Real).sqrt();
            let normal = Normal::new(0.0, std).map_err(|e| crate::Error::Argument(format!("init: {e}")))?;
            k.weight.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
            Ok(())
        };
        fill(&mut p.input, 1.0)?;
        for b in p.blocks.iter_mut() {
            fill(&mut b.conv1, 1.0)?;
            fill(&mut b.conv2, 1.0)?;
        }
        fill(&mut p.output, 0.01)?;
        Ok(p)
    }

    pub fn kernels(&self) -> Vec<(String, &ConvKernel)> {
        let mut v = vec![(String::from("input"), &self.input)];
        for (i, b) in self.blocks.iter().enumerate() {
            v.push((format!("block{i}.conv1"), &b.conv1));
            v.push((format!("block{i}.conv2"), &b.conv2));
        }
        v.push((String::from("output"), &self.output));
        v
    }

    pub fn kernels_mut(&mut self) -> Vec<&mut ConvKernel> {
        let mut v = vec![&mut self.input];
        for b in self.blocks.iter_mut() {
            v.push(&mut b.conv1);
            v.push(&mut b.conv2);
        }
        v.push(&mut self.output);
        v
    }

    /// `x + N(x)` evaluated without recording gradients.
    pub fn apply(&self, x: &ComplexVolume) -> Result<ComplexVolume> {
        check_dims(x.dims())?;
        let mut h = conv3d(&RealTensor4::from_complex(x), &self.input)?;
        for b in &self.blocks {
            let mut t = conv3d(&h, &b.conv1)?;
            t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            let t = conv3d(&t, &b.conv2)?;
            let s = self.config.block_scale;
            h.data_mut().iter_mut().zip(t.data()).for_each(|(a, &b)| *a += s * b);
        }
        let out = conv3d(&h, &self.output)?.to_complex()?;
        Ok(x.add(&out))
    }

    /// Register every kernel as a trainable leaf.
    pub fn register(&self, tape: &mut Tape) -> ResNetVars {
        let mut reg = |k: &ConvKernel| KernelVars {
            weight: tape.param(k.weight.clone()),
            bias: tape.param(k.bias.clone()),
            c_in: k.c_in,
            c_out: k.c_out,
        };
        let input = reg(&self.input);
        let blocks = self.blocks.iter().map(|b| [reg(&b.conv1), reg(&b.conv2)]).collect();
        let output = reg(&self.output);
        ResNetVars { input, blocks, output, block_scale: self.config.block_scale }
    }
}

impl ResNetVars {
    /// Recorded `x + N(x)` on a planar complex buffer.
    pub fn apply(&self, tape: &mut Tape, x: Var, dims: Dims) -> Result<Var> {
        check_dims(dims)?;
        let conv = |tape: &mut Tape, inp: Var, k: &KernelVars| tape.conv3d(inp, k.weight, k.bias, dims, k.c_in, k.c_out);
        let mut h = conv(tape, x, &self.input)?;
        for [c1, c2] in &self.blocks {
            let t = conv(tape, h, c1)?;
            let t = tape.relu(t);
            let t = conv(tape, t, c2)?;
            let t = tape.scale(t, self.block_scale);
            h = tape.add(h, t)?;
        }
        let out = conv(tape, h, &self.output)?;
        tape.add(x, out)
    }

    /// Handles in the same order as [`ResNetParams::kernels`], weight then bias.
    pub fn all(&self) -> Vec<Var> {
        let mut v = vec![self.input.weight, self.input.bias];
        for [a, b] in &self.blocks {
            v.extend([a.weight, a.bias, b.weight, b.bias]);
        }
        v.extend([self.output.weight, self.output.bias]);
        v
    }
}
