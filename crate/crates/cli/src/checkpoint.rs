//! Self-describing checkpoint container, version "dualview-diff/ckpt/v1":
//! a JSON config block (model, schedule, step counter, training image
//! size) followed by named parameter tensors as little-endian f64.

use anyhow::{bail, Context, Result};
use dualview_core::denoiser::{Denoiser, DenoiserConfig};
use dualview_core::diffusion::NoiseSchedule;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8] = b"dualview-diff/ckpt/v1\n";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelBlock {
    pub in_channels: usize,
    pub base_width: usize,
    pub depth: usize,
    pub time_embed_dim: usize,
}

impl From<&DenoiserConfig> for ModelBlock {
    fn from(c: &DenoiserConfig) -> Self {
        ModelBlock {
            in_channels: c.in_channels,
            base_width: c.base_width,
            depth: c.depth,
            time_embed_dim: c.time_embed_dim,
        }
    }
}

impl ModelBlock {
    pub fn to_config(&self) -> DenoiserConfig {
        DenoiserConfig {
            in_channels: self.in_channels,
            base_width: self.base_width,
            depth: self.depth,
            time_embed_dim: self.time_embed_dim,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleBlock {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleBlock {
    pub fn to_schedule(&self) -> Result<NoiseSchedule> {
        Ok(NoiseSchedule::linear(
            self.timesteps,
            self.beta_start,
            self.beta_end,
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub model: ModelBlock,
    pub schedule: ScheduleBlock,
    pub step: u64,
    pub train_height: usize,
    pub train_width: usize,
    pub param_count: usize,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub model: Denoiser,
    pub schedule: NoiseSchedule,
    pub header: Header,
}

pub fn save(
    path: &Path,
    model: &Denoiser,
    schedule_block: &ScheduleBlock,
    step: u64,
    train_height: usize,
    train_width: usize,
) -> Result<()> {
    let header = Header {
        model: ModelBlock::from(model.config()),
        schedule: schedule_block.clone(),
        step,
        train_height,
        train_width,
        param_count: model.param_count(),
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for tensor in model.layout() {
        let name = tensor.name.as_bytes();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(tensor.shape.len() as u32).to_le_bytes());
        for &d in &tensor.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &model.params()[tensor.offset..tensor.offset + tensor.len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;

    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let found = bytes
            .iter()
            .take_while(|&&b| b != b'\n' && b.is_ascii_graphic())
            .take(32)
            .copied()
            .collect::<Vec<u8>>();
        bail!(
            "checkpoint version mismatch: expected {:?}, found {:?}",
            String::from_utf8_lossy(&MAGIC[..MAGIC.len() - 1]),
            String::from_utf8_lossy(&found)
        );
    }
    let mut pos = MAGIC.len();
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            bail!("checkpoint truncated");
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };

    let header_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(&mut pos, header_len)?)
        .context("parsing checkpoint header")?;

    let config = header.model.to_config();
    let reference = Denoiser::new(config, 0)?;
    if reference.param_count() != header.param_count {
        bail!(
            "checkpoint header claims {} parameters, layout has {}",
            header.param_count,
            reference.param_count()
        );
    }
    let mut params = vec![0.0f64; header.param_count];
    for tensor in reference.layout() {
        let name_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8_lossy(take(&mut pos, name_len)?).into_owned();
        if name != tensor.name {
            bail!("checkpoint tensor {:?} where {:?} expected", name, tensor.name);
        }
        let ndim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
        }
        if shape != tensor.shape {
            bail!(
                "checkpoint tensor {:?} has shape {:?}, expected {:?}",
                name,
                shape,
                tensor.shape
            );
        }
        for i in 0..tensor.len {
            let raw = take(&mut pos, 8)?;
            params[tensor.offset + i] = f64::from_le_bytes(raw.try_into().unwrap());
        }
    }
    if pos != bytes.len() {
        bail!("checkpoint has {} trailing bytes", bytes.len() - pos);
    }

    let model = Denoiser::from_parts(header.model.to_config(), params)?;
    let schedule = header.schedule.to_schedule()?;
    Ok(Checkpoint {
        model,
        schedule,
        header,
    })
}
