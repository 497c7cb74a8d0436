//! Losses and the Adam training loop.

mod loss;

use alloc::vec::Vec;

use rand::seq::SliceRandom;

pub use loss::{normalized_l1l2, ssdu_loss, supervised_loss, LossGraph, NormalizedL1L2};

use crate::error::{bail, Error, Result};
use crate::net::{ModelConfig, UnrolledParams};
use crate::prelude::*;
use crate::sample::TrainingSample;
use crate::sampling::SplitConfig;
use crate::tensor::{adam_step, AdamState};
use crate::seeded_rng;

/// Loss abort threshold for the divergence guard.
pub const DIVERGENCE_LIMIT: Real = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossMode {
    #[default]
    SelfSupervised,
    Supervised,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub lr: Real,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub split: SplitConfig,
    /// Draw a fresh `Θ`/`Λ` split for every sample at the start of each epoch.
    pub resplit_each_epoch: bool,
    pub loss: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            epochs: 100,
            batch_size: 1,
            seed: 0,
            model: ModelConfig::default(),
            split: SplitConfig::default(),
            resplit_each_epoch: false,
            loss: LossMode::SelfSupervised,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            bail!(Argument, "learning rate must be non-negative, got {}", self.lr);
        }
        if self.epochs == 0 || self.batch_size == 0 {
            bail!(Argument, "epochs and batch size must be at least 1");
        }
        self.model.validate()?;
        self.split.validate()
    }
}

/// Per-epoch mean loss, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epoch_losses: Vec<Real>,
}

/// Loss graph for `sample` under `mode`.
pub fn sample_loss(sample: &TrainingSample, params: &UnrolledParams, mode: LossMode) -> Result<LossGraph> {
    match mode {
        LossMode::SelfSupervised => ssdu_loss(sample, params),
        LossMode::Supervised => supervised_loss(sample, params),
    }
}

/// Train from a fresh initialization seeded by `cfg.seed`.
pub fn train(dataset: &[TrainingSample], cfg: &TrainConfig) -> Result<(UnrolledParams, TrainHistory)> {
    train_with(dataset, cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean_loss)` after each epoch.
pub fn train_with(
    dataset: &[TrainingSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, Real),
) -> Result<(UnrolledParams, TrainHistory)> {
    cfg.validate()?;
    let Some(first) = dataset.first() else { bail!(Argument, "training set is empty") };
    let dims = first.mask.dims();
    if let Some(s) = dataset.iter().find(|s| s.mask.dims() != dims) {
        bail!(Argument, "sample dims {} differ from {dims}", s.mask.dims());
    }
    if cfg.loss == LossMode::Supervised && dataset.iter().any(|s| s.ground_truth.is_none()) {
        bail!(Argument, "supervised training needs ground truth on every sample");
    }

    let mut params = UnrolledParams::init(cfg.model.clone(), cfg.seed)?;
    let sizes: Vec<usize> = params.groups().iter().map(|g| g.len()).collect();
    let mut adam = AdamState::new(cfg.lr, &sizes);
    let mut rng = seeded_rng(cfg.seed ^ 0x5eed_0f_a11);
    let mut samples: Vec<TrainingSample>;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let data: &[TrainingSample] = if cfg.resplit_each_epoch {
            samples = dataset.to_vec();
            for (i, s) in samples.iter_mut().enumerate() {
                let seed = cfg.split.seed ^ ((epoch as u64) << 32) ^ i as u64;
                s.resplit(&SplitConfig { seed, ..cfg.split.clone() })?;
            }
            &samples
        } else {
            dataset
        };
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<Vec<Real>> = sizes.iter().map(|&n| alloc::vec![0.0; n]).collect();
            for &i in batch {
                let graph = sample_loss(&data[i], &params, cfg.loss)?;
                let value = graph.value();
                if !value.is_finite() || value > DIVERGENCE_LIMIT {
                    return Err(Error::Divergence(alloc::format!(
                        "loss {value} at epoch {} sample {} (subject {}, slab {})",
                        epoch + 1,
                        i,
                        data[i].subject_id,
                        data[i].slab_index
                    )));
                }
                total += value;
                for (a, g) in acc.iter_mut().zip(graph.gradients()?) {
                    a.iter_mut().zip(&g).for_each(|(a, g)| *a += g);
                }
            }
            let inv = 1.0 / batch.len() as Real;
            acc.iter_mut().flatten().for_each(|g| *g *= inv);
            if acc.iter().flatten().any(|g| !g.is_finite()) {
                bail!(Divergence, "non-finite gradient at epoch {}", epoch + 1);
            }
            let grads: Vec<&[Real]> = acc.iter().map(|g| g.as_slice()).collect();
            adam_step(&mut params.groups_mut(), &grads, &mut adam)?;
        }
        let mean = total / dataset.len() as Real;
        history.epoch_losses.push(mean);
        on_epoch(epoch + 1, mean);
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetConfig;
    use crate::physics::{CoilSet, EncodingOperator};
    use crate::sampling::{extract_subvolumes, generate_mask};
    use crate::tensor::Dims;
    use crate::ComplexVolume;
    use alloc::sync::Arc;
    use alloc::vec;

    fn tiny_sample(seed: u64) -> TrainingSample {
        let d = Dims::new(4, 6, 6);
        let mask = generate_mask(d, 2.0, (2, 2), 0, seed).unwrap();
        let coils = CoilSet::new(vec![ComplexVolume::filled(d, Cplx::new(1.0, 0.0))]).unwrap();
        let truth = ComplexVolume::from_fn(d, |x, y, z| {
            let r = (x as Real - 2.0).powi(2) + (y as Real - 3.0).powi(2) + (z as Real - 3.0).powi(2);
            Cplx::new((-r / 4.0).exp(), 0.1)
        });
        let k = EncodingOperator::new(Arc::new(coils.clone()), mask.clone()).unwrap().encode(&truth).unwrap();
        let sub = extract_subvolumes(&k, &mask, &coils, Some(&truth), 4, 4).unwrap().remove(0);
        TrainingSample::from_subvolume(sub, 0, &SplitConfig { seed, ..Default::default() }).unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            model: ModelConfig { net: NetConfig { n_blocks: 1, channels: 2, block_scale: 0.1 }, unrolls: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let data = vec![tiny_sample(1)];
        let cfg = TrainConfig { lr: 0.0, epochs: 3, ..tiny_cfg() };
        let (p, h) = train(&data, &cfg).unwrap();
        assert_eq!(p, UnrolledParams::init(cfg.model.clone(), cfg.seed).unwrap());
        assert!(h.epoch_losses.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(h.epoch_losses.len(), 3);
    }

    #[test]
    fn training_is_deterministic() {
        let data = vec![tiny_sample(1), tiny_sample(2)];
        let a = train(&data, &tiny_cfg()).unwrap();
        let b = train(&data, &tiny_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(train(&[], &tiny_cfg()).is_err());
        let data = vec![tiny_sample(1)];
        assert!(train(&data, &TrainConfig { epochs: 0, ..tiny_cfg() }).is_err());
        let mut no_gt = data.clone();
        no_gt[0].ground_truth = None;
        assert!(train(&no_gt, &TrainConfig { loss: LossMode::Supervised, ..tiny_cfg() }).is_err());
    }

    #[test]
    fn resplit_changes_the_trajectory() {
        let data = vec![tiny_sample(3)];
        let fixed = train(&data, &tiny_cfg()).unwrap().0;
        let re = train(&data, &TrainConfig { resplit_each_epoch: true, ..tiny_cfg() }).unwrap().0;
        assert_ne!(fixed, re);
    }

    #[test]
    fn divergence_guard_trips_on_huge_loss() {
        let data = vec![tiny_sample(4)];
        let cfg = TrainConfig { lr: 1e6, epochs: 5, ..tiny_cfg() };
        match train(&data, &cfg) {
            Err(Error::Divergence(_)) | Err(Error::Numeric(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
