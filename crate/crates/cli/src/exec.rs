//! Rayon-backed gradient executor. Results come back in input order and
//! the reduction stays sequential in the core loop, so training output
//! is identical whatever the thread count.

use dualview_core::denoiser::Denoiser;
use dualview_core::error::Result;
use dualview_core::training::{sample_loss_grad, DiffusionSample, GradExecutor};
use rayon::prelude::*;

pub struct RayonExecutor;

impl GradExecutor for RayonExecutor {
    fn batch(
        &self,
        model: &Denoiser,
        items: &[DiffusionSample],
        h: usize,
        w: usize,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        items
            .par_iter()
            .map(|item| sample_loss_grad(model, item, h, w))
            .collect()
    }
}
