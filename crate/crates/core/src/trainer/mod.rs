//! Training loops: one relation at a time, all relations with a shared
//! model, and the meta-learning variant in which every relation is also
//! trained through a look-ahead step on the other relations.
//!
//! The loops are generic over [`Objective`], so the same code drives the
//! encoder-decoder and the scalar [`QuadraticToy`].

mod log;
mod maml;
mod schedule;
mod toy;

pub use log::{EpochRecord, TrainLog};
pub use maml::{
    inner_update, maml_epoch, maml_step, meta_gradient, train_maml, MamlConfig, MamlStep,
};
pub use schedule::{
    maml_rounds, multitask_schedule, BatchStream, RoundPlan, ScheduledBatch, TaskPlan,
};
pub use toy::QuadraticToy;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EncodedExample, Network};
use crate::tensor::{Adam, Gradients, Optimizer, ParamSet, Sgd};

/// A differentiable loss over batches of examples.
pub trait Objective: Sync {
    type Example: Clone + Send + Sync;

    fn loss(&self, params: &ParamSet, batch: &[Self::Example]) -> Result<f64>;

    /// Loss and gradient. `seed` enables stochastic regularization (dropout)
    /// with a reproducible mask; `None` is the deterministic mode.
    fn loss_and_grad(
        &self,
        params: &ParamSet,
        batch: &[Self::Example],
        seed: Option<u64>,
    ) -> Result<(f64, Gradients)>;
}

impl Objective for Network {
    type Example = EncodedExample;

    fn loss(&self, params: &ParamSet, batch: &[EncodedExample]) -> Result<f64> {
        Network::loss(self, params, batch, None)
    }

    fn loss_and_grad(
        &self,
        params: &ParamSet,
        batch: &[EncodedExample],
        seed: Option<u64>,
    ) -> Result<(f64, Gradients)> {
        let seed = seed.filter(|_| self.config.dropout > 0.0);
        Network::loss_and_grad(self, params, batch, seed)
    }
}

/// The examples of one relation.
#[derive(Clone, Debug)]
pub struct Task<E> {
    pub name: String,
    pub examples: Vec<E>,
}

impl<E: Clone> Task<E> {
    pub fn new(name: impl Into<String>, examples: Vec<E>) -> Self {
        Task {
            name: name.into(),
            examples,
        }
    }

    pub fn batch(&self, ids: &[usize]) -> Vec<E> {
        ids.iter().map(|&i| self.examples[i].clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Apply the objective's stochastic regularization while training.
    pub dropout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            epochs: 10,
            batch_size: 64,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            dropout: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn optimizer(&self, params: &ParamSet) -> Box<dyn Optimizer + Send> {
        match self.optimizer {
            OptimizerKind::Adam => Box::new(Adam::new(params, self.lr)),
            OptimizerKind::Sgd => Box::new(Sgd { lr: self.lr }),
        }
    }

    /// Seed for the stochastic parts of optimizer step `step`; `role`
    /// separates the several gradients taken within one step.
    pub(crate) fn step_seed(&self, step: u64, role: u64) -> Option<u64> {
        self.dropout.then(|| {
            let mut x = self.seed
                ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                ^ role.wrapping_mul(0xD1B5_4A32_D192_ED03);
            x ^= x >> 31;
            x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        })
    }
}

/// Seed roles within one step.
pub(crate) const ROLE_SUPERVISED: u64 = 0;
pub(crate) const ROLE_META: u64 = 1;
pub(crate) const ROLE_INNER: u64 = 2;

/// Final parameters plus one record per epoch.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamSet,
    pub history: Vec<EpochRecord>,
    pub steps: u64,
}

impl TrainOutcome {
    pub fn train_losses(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.train_loss).collect()
    }
}

pub(crate) fn dev_losses<O: Objective>(
    obj: &O,
    params: &ParamSet,
    dev: &[Task<O::Example>],
) -> Result<BTreeMap<String, f64>> {
    dev.iter()
        .filter(|t| !t.examples.is_empty())
        .map(|t| Ok((t.name.clone(), obj.loss(params, &t.examples)?)))
        .collect()
}

pub(crate) struct EpochTimer {
    start: Instant,
}

impl EpochTimer {
    pub(crate) fn start() -> Self {
        EpochTimer {
            start: Instant::now(),
        }
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Adam (or SGD) on one relation: each epoch visits a fresh permutation of
/// the examples in batches.
pub fn train_single_task<O: Objective>(
    obj: &O,
    mut params: ParamSet,
    task: &Task<O::Example>,
    dev: Option<&Task<O::Example>>,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if task.examples.is_empty() {
        return Err(Error::InsufficientData(format!(
            "relation `{}` has no training examples",
            task.name
        )));
    }
    let mut opt = cfg.optimizer(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..task.examples.len()).collect();
    let mut step = 0u64;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let timer = EpochTimer::start();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for ids in order.chunks(cfg.batch_size) {
            let (loss, grads) = obj.loss_and_grad(
                &params,
                &task.batch(ids),
                cfg.step_seed(step, ROLE_SUPERVISED),
            )?;
            opt.step(&mut params, &grads)?;
            total += loss;
            batches += 1;
            step += 1;
        }
        let dev_loss = dev_losses(obj, &params, dev.map(std::slice::from_ref).unwrap_or(&[]))?;
        let rec = EpochRecord::new(
            epoch,
            "single",
            total / batches as f64,
            dev_loss,
            timer.seconds(),
        );
        log.write(&rec)?;
        history.push(rec);
    }
    Ok(TrainOutcome {
        params,
        history,
        steps: step,
    })
}

/// One shared model over all relations; each optimizer step consumes one
/// batch of a relation drawn uniformly at random.
pub fn train_multitask<O: Objective>(
    obj: &O,
    params: ParamSet,
    tasks: &[Task<O::Example>],
    dev: &[Task<O::Example>],
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_multi(tasks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut streams: Vec<BatchStream> = tasks
        .iter()
        .map(|t| BatchStream::new(t.examples.len()))
        .collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        epochs.push(multitask_schedule(
            tasks,
            cfg.batch_size,
            &mut streams,
            &mut rng,
        ));
    }
    train_on_schedule(obj, params, tasks, dev, &epochs, cfg, log)
}

/// Multi-task training on an explicit batch schedule, one inner list per
/// epoch.
pub fn train_on_schedule<O: Objective>(
    obj: &O,
    mut params: ParamSet,
    tasks: &[Task<O::Example>],
    dev: &[Task<O::Example>],
    epochs: &[Vec<ScheduledBatch>],
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<TrainOutcome> {
    let mut opt = cfg.optimizer(&params);
    let mut step = 0u64;
    let mut history = Vec::with_capacity(epochs.len());
    for (e, schedule) in epochs.iter().enumerate() {
        let timer = EpochTimer::start();
        let mut total = 0.0;
        for b in schedule {
            let batch = tasks[b.task].batch(&b.ids);
            let (loss, grads) =
                obj.loss_and_grad(&params, &batch, cfg.step_seed(step, ROLE_SUPERVISED))?;
            opt.step(&mut params, &grads)?;
            total += loss;
            step += 1;
        }
        let rec = EpochRecord::new(
            e + 1,
            "multi",
            total / schedule.len().max(1) as f64,
            dev_losses(obj, &params, dev)?,
            timer.seconds(),
        );
        log.write(&rec)?;
        history.push(rec);
    }
    Ok(TrainOutcome {
        params,
        history,
        steps: step,
    })
}

pub(crate) fn check_multi<E>(tasks: &[Task<E>]) -> Result<()> {
    let nonempty = tasks.iter().filter(|t| !t.examples.is_empty()).count();
    if nonempty < 2 {
        return Err(Error::InsufficientData(format!(
            "multi-relation training needs at least 2 relations with examples, found {nonempty}"
        )));
    }
    if let Some(t) = tasks.iter().find(|t| t.examples.is_empty()) {
        return Err(Error::InsufficientData(format!(
            "relation `{}` has no training examples",
            t.name
        )));
    }
    Ok(())
}
