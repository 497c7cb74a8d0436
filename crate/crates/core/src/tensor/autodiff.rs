//! Reverse-mode automatic differentiation over whole-tensor operations.
//!
//! A [`Tape`] stores every intermediate value in creation order. Nodes only
//! reference earlier nodes, so the graph is acyclic by construction and the
//! backward pass is a single reverse sweep. Values are flat real buffers;
//! complex volumes use the planar `[re | im]` layout.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::prelude::*;

use crate::error::{bail, Result};
use crate::tensor::conv::{self, ConvKernel};
use crate::tensor::Dims;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A real-linear map on flat buffers with its transpose.
///
/// For complex-linear operators acting on planar buffers the transpose is
/// the Hermitian adjoint.
pub trait LinearMap: Send + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply(&self, x: &[Real], out: &mut [Real]);
    fn apply_transpose(&self, y: &[Real], out: &mut [Real]);
}

/// Scalar-valued function of one tensor with a hand-written gradient.
pub trait ScalarFunction: Send + Sync {
    fn value(&self, x: &[Real]) -> Real;
    /// Accumulate `seed * ∂value/∂x` into `grad`.
    fn accumulate_grad(&self, x: &[Real], seed: Real, grad: &mut [Real]);
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, Real),
    Relu(Var),
    Exp(Var),
    /// scalar * tensor
    MulScalar { s: Var, x: Var },
    /// y + alpha * x, alpha scalar
    Axpy { alpha: Var, x: Var, y: Var },
    Dot(Var, Var),
    Div(Var, Var),
    Conv3d { input: Var, weight: Var, bias: Var, dims: Dims, c_in: usize, c_out: usize },
    Linear { input: Var, map: Arc<dyn LinearMap> },
    Function { input: Var, f: Box<dyn ScalarFunction> },
}

struct Node {
    value: Vec<Real>,
    op: Op,
    needs_grad: bool,
    is_param: bool,
}

/// Recorded computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every parameter leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Vec<Real>>>,
}

impl Gradients {
    /// Gradient for `v`; parameters unreachable from the loss hold zeros.
    ///
    /// Panics if `v` is not a parameter leaf of the differentiated tape.
    pub fn get(&self, v: Var) -> &[Real] {
        self.grads[v.0].as_deref().expect("gradient requested for a non-parameter node")
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[Real] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Real {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<Real>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad, is_param: false });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Vec<Real>) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.nodes[v.0].is_param = true;
        v
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Vec<Real>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.len_of(a) != self.len_of(b) {
            bail!(Argument, "{what}: length {} vs {}", self.len_of(a), self.len_of(b));
        }
        Ok(())
    }

    fn scalar_check(&self, s: Var, what: &str) -> Result<()> {
        if self.len_of(s) != 1 {
            bail!(Argument, "{what}: expected scalar, got length {}", self.len_of(s));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "add")?;
        let v = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "sub")?;
        let v = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, c: Real) -> Var {
        let v = self.value(a).iter().map(|x| c * x).collect();
        let ng = self.needs(a);
        self.push(v, Op::Scale(a, c), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let ng = self.needs(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.exp()).collect();
        let ng = self.needs(a);
        self.push(v, Op::Exp(a), ng)
    }

    pub fn mul_scalar(&mut self, s: Var, x: Var) -> Result<Var> {
        self.scalar_check(s, "mul_scalar")?;
        let sv = self.scalar(s);
        let v = self.value(x).iter().map(|a| sv * a).collect();
        let ng = self.needs(s) || self.needs(x);
        Ok(self.push(v, Op::MulScalar { s, x }, ng))
    }

    /// `y + alpha * x`
    pub fn axpy(&mut self, alpha: Var, x: Var, y: Var) -> Result<Var> {
        self.scalar_check(alpha, "axpy")?;
        self.same_len(x, y, "axpy")?;
        let a = self.scalar(alpha);
        let v = self.value(y).iter().zip(self.value(x)).map(|(yv, xv)| yv + a * xv).collect();
        let ng = self.needs(alpha) || self.needs(x) || self.needs(y);
        Ok(self.push(v, Op::Axpy { alpha, x, y }, ng))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "dot")?;
        let v: Real = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![v], Op::Dot(a, b), ng))
    }

    /// Scalar division `a / b`.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.scalar_check(a, "div")?;
        self.scalar_check(b, "div")?;
        let v = self.scalar(a) / self.scalar(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![v], Op::Div(a, b), ng))
    }

    /// Same-size convolution; `weight` and `bias` are flat buffers laid out
    /// as in [`ConvKernel`].
    pub fn conv3d(&mut self, input: Var, weight: Var, bias: Var, dims: Dims, c_in: usize, c_out: usize) -> Result<Var> {
        if self.len_of(input) != c_in * dims.len() {
            bail!(Argument, "conv3d input holds {} reals, expected {c_in}x{dims}", self.len_of(input));
        }
        let kernel = ConvKernel::new(c_out, c_in, self.value(weight).to_vec(), self.value(bias).to_vec())?;
        let mut out = vec![0.0; c_out * dims.len()];
        conv::forward_raw(self.value(input), dims, &kernel, &mut out);
        let ng = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(out, Op::Conv3d { input, weight, bias, dims, c_in, c_out }, ng))
    }

    pub fn linear(&mut self, input: Var, map: Arc<dyn LinearMap>) -> Result<Var> {
        if self.len_of(input) != map.input_len() {
            bail!(Argument, "linear map expects {} inputs, got {}", map.input_len(), self.len_of(input));
        }
        let mut out = vec![0.0; map.output_len()];
        map.apply(self.value(input), &mut out);
        let ng = self.needs(input);
        Ok(self.push(out, Op::Linear { input, map }, ng))
    }

    pub fn function(&mut self, input: Var, f: Box<dyn ScalarFunction>) -> Var {
        let v = f.value(self.value(input));
        let ng = self.needs(input);
        self.push(vec![v], Op::Function { input, f }, ng)
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.len_of(loss) != 1 {
            bail!(Argument, "backward needs a scalar loss, got length {}", self.len_of(loss));
        }
        let mut grads: Vec<Option<Vec<Real>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_param {
                if grads[i].is_none() {
                    grads[i] = Some(vec![0.0; node.value.len()]);
                }
            } else {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[Real], grads: &mut [Option<Vec<Real>>]) {
        let acc = |v: Var, grads: &mut [Option<Vec<Real>>], f: &mut dyn FnMut(&mut [Real])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
                acc(*b, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
            }
            Op::Sub(a, b) => {
                acc(*a, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
                acc(*b, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s -= g));
            }
            Op::Scale(a, c) => acc(*a, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += c * g)),
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(*a, grads, &mut |s| {
                    for ((s, g), x) in s.iter_mut().zip(g).zip(x) {
                        if *x > 0.0 {
                            *s += g;
                        }
                    }
                })
            }
            Op::Exp(a) => {
                let y = &node.value;
                acc(*a, grads, &mut |s| s.iter_mut().zip(g).zip(y).for_each(|((s, g), y)| *s += g * y));
            }
            Op::MulScalar { s: sv, x } => {
                let xv = self.value(*x);
                let scalar = self.scalar(*sv);
                let gs: Real = g.iter().zip(xv).map(|(a, b)| a * b).sum();
                acc(*sv, grads, &mut |s| s[0] += gs);
                acc(*x, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += scalar * g));
            }
            Op::Axpy { alpha, x, y } => {
                let xv = self.value(*x);
                let a = self.scalar(*alpha);
                let ga: Real = g.iter().zip(xv).map(|(a, b)| a * b).sum();
                acc(*alpha, grads, &mut |s| s[0] += ga);
                acc(*x, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += a * g));
                acc(*y, grads, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
            }
            Op::Dot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let g0 = g[0];
                acc(*a, grads, &mut |s| s.iter_mut().zip(bv).for_each(|(s, b)| *s += g0 * b));
                acc(*b, grads, &mut |s| s.iter_mut().zip(av).for_each(|(s, a)| *s += g0 * a));
            }
            Op::Div(a, b) => {
                let (av, bv) = (self.scalar(*a), self.scalar(*b));
                let g0 = g[0];
                acc(*a, grads, &mut |s| s[0] += g0 / bv);
                acc(*b, grads, &mut |s| s[0] -= g0 * av / (bv * bv));
            }
            Op::Conv3d { input, weight, bias, dims, c_in, c_out } => {
                let kernel = ConvKernel {
                    c_out: *c_out,
                    c_in: *c_in,
                    weight: self.value(*weight).to_vec(),
                    bias: self.value(*bias).to_vec(),
                };
                acc(*input, grads, &mut |s| conv::backward_input_raw(g, *dims, &kernel, s));
                let wants_w = self.nodes[weight.0].needs_grad;
                let wants_b = self.nodes[bias.0].needs_grad;
                if wants_w || wants_b {
                    let mut gw = vec![0.0; kernel.weight.len()];
                    let mut gb = vec![0.0; *c_out];
                    conv::backward_params_raw(self.value(*input), g, *dims, &kernel, &mut gw, &mut gb);
                    acc(*weight, grads, &mut |s| s.iter_mut().zip(&gw).for_each(|(s, v)| *s += v));
                    acc(*bias, grads, &mut |s| s.iter_mut().zip(&gb).for_each(|(s, v)| *s += v));
                }
            }
            Op::Linear { input, map } => {
                let mut tmp = vec![0.0; map.input_len()];
                map.apply_transpose(g, &mut tmp);
                acc(*input, grads, &mut |s| s.iter_mut().zip(&tmp).for_each(|(s, v)| *s += v));
            }
            Op::Function { input, f } => {
                let x = self.value(*input);
                acc(*input, grads, &mut |s| f.accumulate_grad(x, g[0], s));
            }
        }
    }
}
