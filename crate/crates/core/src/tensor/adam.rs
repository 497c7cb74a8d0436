use alloc::vec;
use alloc::vec::Vec;

use crate::prelude::*;

use crate::error::{bail, Result};

/// Adam optimizer state with bias-corrected moments.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub step: u64,
    pub lr: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    pub m: Vec<Vec<Real>>,
    pub v: Vec<Vec<Real>>,
}

impl AdamState {
    /// Zeroed moments for parameters of the given sizes, default betas.
    pub fn new(lr: Real, sizes: &[usize]) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut [&mut [Real]], grads: &[&[Real]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        bail!(
            Argument,
            "adam: {} parameter groups, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        );
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            bail!(Argument, "adam: group {i} has {} values, {} gradients, {} moments", p.len(), g.len(), state.m[i].len());
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(0.001, &[1]);
        adam_step(&mut [&mut p], &[&[2.0]], &mut st).unwrap();
        // m̂ = 2, v̂ = 4 => p - lr * 2 / (2 + eps)
        let expected = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.999).abs() < 1e-9);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_fresh_parameters_alone() {
        let mut p = vec![0.5, -1.5];
        let mut st = AdamState::new(0.1, &[2]);
        adam_step(&mut [&mut p], &[&[0.0, 0.0]], &mut st).unwrap();
        assert_eq!(p, vec![0.5, -1.5]);
        assert!(st.m[0].iter().chain(&st.v[0]).all(|&x| x == 0.0));
    }

    #[test]
    fn drift_after_gradient_decays() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(0.01, &[1]);
        adam_step(&mut [&mut p], &[&[1.0]], &mut st).unwrap();
        let m_before = st.m[0][0];
        let p1 = p[0];
        adam_step(&mut [&mut p], &[&[0.0]], &mut st).unwrap();
        let p2 = p[0];
        adam_step(&mut [&mut p], &[&[0.0]], &mut st).unwrap();
        let p3 = p[0];
        assert!(st.m[0][0].abs() < m_before.abs());
        assert!((p3 - p2).abs() < (p2 - p1).abs());
        assert!((p2 - p1).abs() > 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamState::new(0.01, &[2]);
        assert!(adam_step(&mut [&mut p], &[&[1.0]], &mut st).is_err());
        assert_eq!(st.step, 0);
    }
}
