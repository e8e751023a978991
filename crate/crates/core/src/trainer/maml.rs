use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_multi, dev_losses, maml_rounds, BatchStream, EpochRecord, EpochTimer, Objective,
    RoundPlan, Task, TrainConfig, TrainLog, TrainOutcome, ROLE_INNER, ROLE_META, ROLE_SUPERVISED,
};
use crate::error::{Error, Result};
use crate::tensor::{Gradients, Optimizer, ParamSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MamlConfig {
    /// Inner (look-ahead) step size.
    pub alpha: f64,
    /// Weight of the meta-test gradient; the supervised gradient gets `1 - β`.
    pub beta: f64,
    /// Take the meta-test gradient at `θ'` and apply it to `θ` directly.
    /// When false, the inner step is differentiated through with a
    /// finite-difference Hessian-vector product.
    pub first_order: bool,
    /// Relative step of that finite difference.
    pub fd_epsilon: f64,
}

impl Default for MamlConfig {
    fn default() -> Self {
        MamlConfig {
            alpha: 0.001,
            beta: 0.01,
            first_order: true,
            fd_epsilon: 1e-5,
        }
    }
}

impl MamlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta", "must be in [0, 1]"));
        }
        if self.fd_epsilon.is_nan() || self.fd_epsilon <= 0.0 {
            return Err(Error::config("fd_epsilon", "must be positive"));
        }
        Ok(())
    }
}

fn summed_gradient<O: Objective>(
    obj: &O,
    params: &ParamSet,
    batches: &[Vec<O::Example>],
    seed: Option<u64>,
) -> Result<Gradients> {
    let mut total = Gradients::zeros_like(params);
    for (j, batch) in batches.iter().enumerate() {
        let (_, g) = obj.loss_and_grad(params, batch, seed.map(|s| s.wrapping_add(j as u64)))?;
        total.add_scaled(&g, 1.0);
    }
    Ok(total)
}

/// `θ' = θ − α ∇_θ Σ_j L_j(θ)` over one batch per other task. Returns a
/// new set; `theta` is not modified.
pub fn inner_update<O: Objective>(
    obj: &O,
    theta: &ParamSet,
    others: &[Vec<O::Example>],
    alpha: f64,
    seed: Option<u64>,
) -> Result<ParamSet> {
    if others.is_empty() {
        return Err(Error::InsufficientData(
            "the look-ahead step needs at least one other relation".into(),
        ));
    }
    let g = summed_gradient(obj, theta, others, seed)?;
    Ok(theta.descended(&g, alpha))
}

/// Meta-test loss `L_i(θ')` on `d1` and its gradient. First order: the
/// gradient at `θ'`. Second order: `(I − α H) ∇L_i(θ')`, with `H` the Hessian
/// of the summed inner loss at `θ`, applied by central differences.
pub fn meta_gradient<O: Objective>(
    obj: &O,
    theta: &ParamSet,
    others: &[Vec<O::Example>],
    d1: &[O::Example],
    maml: &MamlConfig,
    inner_seed: Option<u64>,
    meta_seed: Option<u64>,
) -> Result<(f64, Gradients)> {
    let adapted = inner_update(obj, theta, others, maml.alpha, inner_seed)?;
    let (loss, g) = obj.loss_and_grad(&adapted, d1, meta_seed)?;
    if maml.first_order {
        return Ok((loss, g));
    }
    let eps = maml.fd_epsilon / g.norm().max(1.0);
    let up = summed_gradient(obj, &theta.offset(&g, eps), others, inner_seed)?;
    let down = summed_gradient(obj, &theta.offset(&g, -eps), others, inner_seed)?;
    let hv = up.combine(1.0 / (2.0 * eps), &down, -1.0 / (2.0 * eps));
    Ok((loss, g.combine(1.0, &hv, -maml.alpha)))
}

/// Losses observed by one [`maml_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MamlStep {
    pub meta_loss: f64,
    pub supervised_loss: f64,
}

/// One target task: look-ahead on the other tasks, then a single outer
/// step along `β · g_meta + (1 − β) · g_supervised`.
#[allow(clippy::too_many_arguments)]
pub fn maml_step<O: Objective>(
    obj: &O,
    params: &mut ParamSet,
    opt: &mut dyn Optimizer,
    d1: &[O::Example],
    d2: &[O::Example],
    others: &[Vec<O::Example>],
    maml: &MamlConfig,
    cfg: &TrainConfig,
    step: u64,
) -> Result<MamlStep> {
    let (meta_loss, g_meta) = meta_gradient(
        obj,
        params,
        others,
        d1,
        maml,
        cfg.step_seed(step, ROLE_INNER),
        cfg.step_seed(step, ROLE_META),
    )?;
    let (supervised_loss, g_sup) =
        obj.loss_and_grad(params, d2, cfg.step_seed(step, ROLE_SUPERVISED))?;
    let g = g_meta.combine(maml.beta, &g_sup, 1.0 - maml.beta);
    opt.step(params, &g)?;
    Ok(MamlStep {
        meta_loss,
        supervised_loss,
    })
}

/// Runs `rounds`; each round takes one [`maml_step`] per task in order.
/// `step` counts optimizer steps across calls. Returns the mean
/// supervised loss.
#[allow(clippy::too_many_arguments)]
pub fn maml_epoch<O: Objective>(
    obj: &O,
    params: &mut ParamSet,
    opt: &mut dyn Optimizer,
    tasks: &[Task<O::Example>],
    rounds: &[RoundPlan],
    maml: &MamlConfig,
    cfg: &TrainConfig,
    step: &mut u64,
) -> Result<f64> {
    maml.validate()?;
    check_multi(tasks)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for round in rounds {
        if round.tasks.len() != tasks.len() {
            return Err(Error::InsufficientData(
                "round plan does not cover every relation".into(),
            ));
        }
        let d1: Vec<Vec<O::Example>> = tasks
            .iter()
            .zip(&round.tasks)
            .map(|(t, p)| t.batch(&p.d1))
            .collect();
        for (i, (task, plan)) in tasks.iter().zip(&round.tasks).enumerate() {
            if plan.d1.is_empty() || plan.d2.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "relation `{}` cannot supply two batches",
                    task.name
                )));
            }
            let others: Vec<Vec<O::Example>> = d1
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| b.clone())
                .collect();
            let out = maml_step(
                obj,
                params,
                opt,
                &d1[i],
                &task.batch(&plan.d2),
                &others,
                maml,
                cfg,
                *step,
            )?;
            total += out.supervised_loss;
            count += 1;
            *step += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Meta-learned multi-task training for `cfg.epochs` epochs.
pub fn train_maml<O: Objective>(
    obj: &O,
    mut params: ParamSet,
    tasks: &[Task<O::Example>],
    dev: &[Task<O::Example>],
    cfg: &TrainConfig,
    maml: &MamlConfig,
    log: &mut TrainLog,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    maml.validate()?;
    check_multi(tasks)?;
    if let Some(t) = tasks.iter().find(|t| t.examples.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "relation `{}` needs at least 2 examples for two disjoint batches",
            t.name
        )));
    }
    let mut opt = cfg.optimizer(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut streams: Vec<BatchStream> = tasks
        .iter()
        .map(|t| BatchStream::new(t.examples.len()))
        .collect();
    let mut step = 0u64;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let timer = EpochTimer::start();
        let rounds = maml_rounds(tasks, cfg.batch_size, &mut streams, &mut rng);
        let loss = maml_epoch(
            obj,
            &mut params,
            opt.as_mut(),
            tasks,
            &rounds,
            maml,
            cfg,
            &mut step,
        )?;
        let rec = EpochRecord::new(
            epoch,
            "maml",
            loss,
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
