//! Training loop: AdamW with decoupled weight decay, a per-epoch
//! learning-rate multiplier, seeded shuffling and batching.
//!
//! Determinism contract: every random draw (shuffle order, timesteps,
//! noise) happens sequentially on the caller's thread, and batch
//! gradients are reduced in index order, so the loss trajectory depends
//! only on (dataset, config, seed) — never on thread count. Parallelism
//! plugs in through [`GradExecutor`].

use crate::denoiser::Denoiser;
use crate::diffusion::{forward_noise, to_model_range, NoiseSchedule};
use crate::error::{Error, Result};
use crate::image::EncodedTriple;
use crate::rng::Rng;
use alloc::vec;
use alloc::vec::Vec;

/// Per-epoch learning-rate multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    /// λ(e) = 1.
    Constant,
    /// λ(e) = 1 − e/total; errors once the multiplier would go negative.
    LinearDecay { total_epochs: usize },
    /// λ(e) = gamma^(e div step_size).
    StepDecay { gamma: f64, step_size: usize },
}

/// effective_lr = base_lr × λ(epoch).
pub fn lambda_lr(epoch: usize, base_lr: f64, schedule: &LrSchedule) -> Result<f64> {
    let lambda = match schedule {
        LrSchedule::Constant => 1.0,
        LrSchedule::LinearDecay { total_epochs } => {
            if *total_epochs == 0 {
                return Err(Error::InvalidArgument("total_epochs must be positive"));
            }
            1.0 - epoch as f64 / *total_epochs as f64
        }
        LrSchedule::StepDecay { gamma, step_size } => {
            if *gamma <= 0.0 || *step_size == 0 {
                return Err(Error::InvalidArgument(
                    "step decay needs gamma > 0 and step_size > 0",
                ));
            }
            libm::pow(*gamma, (epoch / step_size) as f64)
        }
    };
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("negative learning-rate multiplier"));
    }
    Ok(base_lr * lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub weight_decay: f64,
    pub adam_eps: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 16,
            epochs: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            weight_decay: 0.01,
            adam_eps: 1e-8,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: it turns training into a recorded no-op,
        // which tests rely on
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument("learning_rate must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::InvalidArgument("adam betas must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight_decay must be nonnegative"));
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter. The running
/// β^t powers are kept incrementally so bias correction is exact and
/// cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }
}

/// One AdamW update: decoupled weight decay (param −= lr·wd·param)
/// followed by the Adam moment update with bias correction.
#[allow(clippy::too_many_arguments)]
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    weight_decay: f64,
    eps: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            got: if grads.len() != params.len() {
                grads.len()
            } else {
                state.m.len()
            },
        });
    }
    state.step += 1;
    state.beta1_pow *= beta1;
    state.beta2_pow *= beta2;
    let bc1 = 1.0 - state.beta1_pow;
    let bc2 = 1.0 - state.beta2_pow;
    for i in 0..params.len() {
        let g = grads[i];
        params[i] -= lr * weight_decay * params[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
    }
    Ok(())
}

/// One training example: the noised tensor, its timestep and the noise
/// target, all in model space.
#[derive(Debug, Clone)]
pub struct DiffusionSample {
    pub x_t: Vec<f64>,
    pub t: usize,
    pub eps: Vec<f64>,
}

/// Loss and parameter gradient for one prepared sample.
pub fn sample_loss_grad(
    model: &Denoiser,
    item: &DiffusionSample,
    h: usize,
    w: usize,
) -> Result<(f64, Vec<f64>)> {
    model.loss_and_grad_noised(&item.x_t, h, w, item.t, &item.eps)
}

/// Evaluates a batch of per-sample gradients. Implementations may run
/// samples in parallel but must return results in input order; the
/// reduction downstream is sequential, so results cannot depend on
/// thread count.
pub trait GradExecutor {
    fn batch(
        &self,
        model: &Denoiser,
        items: &[DiffusionSample],
        h: usize,
        w: usize,
    ) -> Result<Vec<(f64, Vec<f64>)>>;
}

/// Straight-line executor used by default and in tests.
pub struct SequentialExecutor;

impl GradExecutor for SequentialExecutor {
    fn batch(
        &self,
        model: &Denoiser,
        items: &[DiffusionSample],
        h: usize,
        w: usize,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        items
            .iter()
            .map(|item| sample_loss_grad(model, item, h, w))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Mean per-sample loss of each completed epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    pub seed: u64,
}

#[derive(Debug)]
pub enum TrainError<E> {
    Core(Error),
    /// The per-epoch callback (checkpointing) failed.
    Callback(E),
}

impl<E> From<Error> for TrainError<E> {
    fn from(e: Error) -> Self {
        TrainError::Core(e)
    }
}

/// Train a denoiser on encoded triples.
///
/// `on_epoch(epoch, mean_loss, model)` runs after every epoch; returning
/// an error aborts training (used for checkpoint I/O failures).
pub fn train<X, F, E>(
    dataset: &[EncodedTriple],
    cfg: &TrainConfig,
    model: &mut Denoiser,
    sched: &NoiseSchedule,
    executor: &X,
    mut on_epoch: F,
) -> core::result::Result<TrainOutcome, TrainError<E>>
where
    X: GradExecutor,
    F: FnMut(usize, f64, &Denoiser) -> core::result::Result<(), E>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("train dataset").into());
    }
    let (w, h) = dataset[0].dims();
    for t in dataset {
        if t.dims() != (w, h) {
            return Err(Error::ShapeMismatch {
                expected: (w, h),
                got: t.dims(),
            }
            .into());
        }
    }

    // map the whole dataset to model space once
    let tensors: Vec<Vec<f64>> = dataset.iter().map(to_model_range).collect();
    let len = 3 * h * w;
    let timesteps = sched.timesteps() as u64;

    let mut rng = Rng::new(cfg.seed);
    let mut state = AdamState::new(model.param_count());
    let mut order: Vec<usize> = (0..tensors.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps = 0u64;

    for epoch in 0..cfg.epochs {
        let lr = lambda_lr(epoch, cfg.learning_rate, &cfg.lr_schedule)?;
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            // draws happen here, sequentially, so the executor cannot
            // perturb the random stream
            let items: Vec<DiffusionSample> = batch
                .iter()
                .map(|&idx| {
                    let t = 1 + rng.next_below(timesteps) as usize;
                    let eps = rng.normal_vec(len);
                    let x_t = forward_noise(&tensors[idx], t, &eps, sched)?;
                    Ok(DiffusionSample { x_t, t, eps })
                })
                .collect::<Result<_>>()?;

            let results = executor.batch(model, &items, h, w)?;
            let inv = 1.0 / results.len() as f64;
            let mut grad = vec![0.0; model.param_count()];
            for (loss, g) in &results {
                loss_sum += loss;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi * inv;
                }
            }
            adamw_step(
                model.params_mut(),
                &grad,
                &mut state,
                lr,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.weight_decay,
                cfg.adam_eps,
            )?;
            steps += 1;
        }
        let mean_loss = loss_sum / tensors.len() as f64;
        epoch_losses.push(mean_loss);
        on_epoch(epoch, mean_loss, model).map_err(TrainError::Callback)?;
    }

    Ok(TrainOutcome {
        epoch_losses,
        steps,
        seed: cfg.seed,
    })
}
