//! Model-side commands: training, sampling, schedule audit.

use crate::checkpoint::{self, ScheduleBlock};
use crate::container;
use crate::exec::RayonExecutor;
use crate::manifest;
use crate::png_io;
use crate::report::{self, TrainReportDoc};
use anyhow::{bail, Context, Result};
use clap::Args;
use dualview_core::codec;
use dualview_core::denoiser::{Denoiser, DenoiserConfig};
use dualview_core::diffusion::{self, NoiseSchedule};
use dualview_core::image::EncodedTriple;
use dualview_core::postprocess::{percentile_clip_triple, ClipConfig};
use dualview_core::rng::Rng;
use dualview_core::training::{self, LrSchedule, TrainConfig, TrainError};
use rayon::prelude::*;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

// serde default helpers: the values mirror the documented hyperparameter
// defaults (lr 1e-5, batch 16, epochs 100, betas (0.9, 0.999))
fn d_lr() -> f64 {
    1e-5
}
fn d_batch() -> usize {
    16
}
fn d_epochs() -> usize {
    100
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_wd() -> f64 {
    0.01
}
fn d_adam_eps() -> f64 {
    1e-8
}
fn d_timesteps() -> usize {
    1000
}
fn d_beta_start() -> f64 {
    1e-4
}
fn d_beta_end() -> f64 {
    0.02
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrLambdaDoc {
    /// λ(e) = 1.
    #[default]
    Constant,
    /// λ(e) = 1 − e/epochs.
    Linear,
    /// λ(e) = gamma^(e div step_size).
    Step { gamma: f64, step_size: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default = "ModelDoc::d_in")]
    pub in_channels: usize,
    #[serde(default = "ModelDoc::d_base")]
    pub base_width: usize,
    #[serde(default = "ModelDoc::d_depth")]
    pub depth: usize,
    #[serde(default = "ModelDoc::d_temb")]
    pub time_embed_dim: usize,
}

impl ModelDoc {
    fn d_in() -> usize {
        3
    }
    fn d_base() -> usize {
        32
    }
    fn d_depth() -> usize {
        3
    }
    fn d_temb() -> usize {
        128
    }
}

impl Default for ModelDoc {
    fn default() -> Self {
        ModelDoc {
            in_channels: 3,
            base_width: 32,
            depth: 3,
            time_embed_dim: 128,
        }
    }
}

/// The train subcommand's JSON config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigDoc {
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "d_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_adam_eps")]
    pub adam_eps: f64,
    #[serde(default)]
    pub lr_lambda: LrLambdaDoc,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_timesteps")]
    pub timesteps: usize,
    #[serde(default = "d_beta_start")]
    pub beta_start: f64,
    #[serde(default = "d_beta_end")]
    pub beta_end: f64,
    #[serde(default)]
    pub model: ModelDoc,
    /// Write the checkpoint every K epochs (0 = final only).
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl TrainConfigDoc {
    fn to_train_config(&self) -> TrainConfig {
        let lr_schedule = match &self.lr_lambda {
            LrLambdaDoc::Constant => LrSchedule::Constant,
            LrLambdaDoc::Linear => LrSchedule::LinearDecay {
                total_epochs: self.epochs,
            },
            LrLambdaDoc::Step { gamma, step_size } => LrSchedule::StepDecay {
                gamma: *gamma,
                step_size: *step_size,
            },
        };
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            weight_decay: self.weight_decay,
            adam_eps: self.adam_eps,
            lr_schedule,
            seed: self.seed,
        }
    }

    fn model_config(&self) -> DenoiserConfig {
        DenoiserConfig {
            in_channels: self.model.in_channels,
            base_width: self.model.base_width,
            depth: self.model.depth,
            time_embed_dim: self.model.time_embed_dim,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory with a manifest (triples or view pairs).
    #[arg(long)]
    pub data: PathBuf,
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint output path; the report and loss curve land next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Load every pair and re-encode so the difference plane is exact on the
/// quantized views (the stored plane went through uint16 rounding).
fn load_training_triples(data_dir: &Path) -> Result<Vec<EncodedTriple>> {
    let (man, dir) = manifest::load_dir(data_dir)?;
    let pairs = man.load_pairs(&dir)?;
    if pairs.is_empty() {
        bail!("no training pairs in {}", data_dir.display());
    }
    Ok(pairs
        .iter()
        .map(codec::encode)
        .collect::<dualview_core::Result<_>>()?)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let doc: TrainConfigDoc = serde_json::from_str(
        &std::fs::read_to_string(&args.config)
            .with_context(|| format!("reading {}", args.config.display()))?,
    )
    .with_context(|| format!("parsing {}", args.config.display()))?;

    let triples = load_training_triples(&args.data)?;
    let (w, h) = triples[0].dims();
    let sched = NoiseSchedule::linear(doc.timesteps, doc.beta_start, doc.beta_end)?;
    let sched_block = ScheduleBlock {
        timesteps: doc.timesteps,
        beta_start: doc.beta_start,
        beta_end: doc.beta_end,
    };
    let mut model = Denoiser::new(doc.model_config(), doc.seed)?;
    let cfg = doc.to_train_config();

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    let steps_per_epoch = triples.len().div_ceil(cfg.batch_size) as u64;
    let started = Instant::now();
    let outcome = training::train(
        &triples,
        &cfg,
        &mut model,
        &sched,
        &RayonExecutor,
        |epoch, mean_loss, model| -> Result<()> {
            eprintln!("epoch {epoch}: mean loss {mean_loss:.6}");
            if doc.checkpoint_every > 0 && (epoch + 1) % doc.checkpoint_every == 0 {
                checkpoint::save(
                    &args.out,
                    model,
                    &sched_block,
                    (epoch as u64 + 1) * steps_per_epoch,
                    h,
                    w,
                )?;
            }
            Ok(())
        },
    )
    .map_err(|e| match e {
        TrainError::Core(err) => anyhow::anyhow!(err),
        TrainError::Callback(err) => err.context("periodic checkpoint"),
    })?;
    let wall = started.elapsed().as_secs_f64();

    checkpoint::save(&args.out, &model, &sched_block, outcome.steps, h, w)?;
    report::write_losses_csv(&outcome.epoch_losses, &args.out.with_extension("losses.csv"))?;
    report::write_json(
        &TrainReportDoc {
            seed: outcome.seed,
            epochs: outcome.epoch_losses.len(),
            steps: outcome.steps,
            epoch_losses: outcome.epoch_losses.clone(),
            wall_time_secs: wall,
            checkpoint: args.out.display().to_string(),
        },
        &args.out.with_extension("report.json"),
    )?;
    println!(
        "train: {} epochs, {} steps, final checkpoint {}",
        outcome.epoch_losses.len(),
        outcome.steps,
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Number of triples to draw.
    #[arg(long, short = 'n')]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling resolution; defaults to the training size.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub lo: f64,
    #[arg(long, default_value_t = 99.5)]
    pub hi: f64,
}

pub fn sample(args: SampleArgs) -> Result<()> {
    if args.n == 0 {
        bail!("need at least one sample");
    }
    let ckpt = checkpoint::load(&args.ckpt)?;
    let h = args.size.unwrap_or(ckpt.header.train_height);
    let w = args.size.unwrap_or(ckpt.header.train_width);
    let clip = ClipConfig {
        lo_percentile: args.lo,
        hi_percentile: args.hi,
        rescale: true,
    };
    clip.validate()?;
    std::fs::create_dir_all(&args.out)?;

    (0..args.n)
        .into_par_iter()
        .map(|i| -> Result<()> {
            let mut rng = Rng::stream(args.seed, i as u64);
            let raw = diffusion::sample(&ckpt.model, h, w, &ckpt.schedule, &mut rng)?;
            let (clipped, outcomes) = percentile_clip_triple(&raw, &clip)?;
            for (c, o) in outcomes.iter().enumerate() {
                if o.degenerate {
                    eprintln!("sample {i}: channel {c} degenerate after clip");
                }
            }
            let stem = format!("sample-{i:04}");
            container::save_triple(&args.out, &stem, &clipped)?;
            png_io::save_preview_rgb(&clipped, &args.out.join(format!("{stem}_preview.png")))?;
            Ok(())
        })
        .collect::<Result<()>>()?;

    println!(
        "sample: wrote {} triples (+previews) to {}",
        args.n,
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct ScheduleDumpArgs {
    #[arg(long, default_value_t = 1000)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 0.02)]
    pub beta_end: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn schedule_dump(args: ScheduleDumpArgs) -> Result<()> {
    let sched = NoiseSchedule::linear(args.timesteps, args.beta_start, args.beta_end)?;
    let mut out = String::from("t,beta,alpha,alpha_bar\n");
    for t in 1..=sched.timesteps() {
        out.push_str(&format!(
            "{t},{},{},{}\n",
            sched.beta(t),
            sched.alpha(t),
            sched.alpha_bar(t)
        ));
    }
    std::fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("schedule-dump: {} rows to {}", args.timesteps, args.out.display());
    Ok(())
}
