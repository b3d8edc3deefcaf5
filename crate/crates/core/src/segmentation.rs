//! Breast-mask extraction via Otsu's global threshold.
//!
//! Histogram-based search over 256 uniform bins; the threshold sits at
//! the upper boundary of the last background bin, ties break toward the
//! lower threshold, and the mask keeps pixels strictly above the
//! threshold. No morphological cleanup is applied afterwards.

use crate::codec::DualViewPair;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage};
use alloc::vec;

pub const OTSU_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct OtsuResult {
    /// Bin-boundary intensity; mask bit = (pixel > threshold).
    pub threshold: f64,
    pub between_class_variance: f64,
    pub mask: BinaryMask,
    /// All pixels fell in a single bin: no valid split exists.
    pub degenerate: bool,
}

#[inline]
fn bin_of(v: f64, bins: usize) -> usize {
    let b = libm::floor(v.clamp(0.0, 1.0) * bins as f64) as usize;
    b.min(bins - 1)
}

/// Maximize the between-class variance σ_b²(τ) = w0·w1·(μ0 − μ1)² over
/// the bin boundaries τ_k = (k + 1)/bins.
pub fn otsu_threshold(img: &GrayImage, bins: usize) -> Result<OtsuResult> {
    if img.pixels().is_empty() {
        return Err(Error::EmptyInput("otsu_threshold"));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("otsu needs at least 2 bins"));
    }

    let mut hist = vec![0u64; bins];
    for &v in img.pixels() {
        hist[bin_of(v, bins)] += 1;
    }
    let n = img.pixels().len() as f64;
    let total_mean: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| b as f64 * c as f64)
        .sum::<f64>()
        / n;

    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for (k, &count) in hist.iter().enumerate().take(bins - 1) {
        w0 += count as f64 / n;
        sum0 += k as f64 * count as f64 / n;
        let w1 = 1.0 - w0;
        if w0 <= 0.0 || w1 <= 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_mean - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        // strict > keeps the first (lowest) threshold on ties
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((k, var));
        }
    }

    match best {
        Some((k, var)) => {
            let threshold = (k + 1) as f64 / bins as f64;
            let bits = img.pixels().iter().map(|&v| v > threshold).collect();
            Ok(OtsuResult {
                threshold,
                between_class_variance: var,
                mask: BinaryMask::new(img.width(), img.height(), bits)?,
                degenerate: false,
            })
        }
        None => {
            // every pixel in one bin; report the pixel level itself
            let level = img.pixels().iter().sum::<f64>() / n;
            Ok(OtsuResult {
                threshold: level,
                between_class_variance: 0.0,
                mask: BinaryMask::all_false(img.width(), img.height()),
                degenerate: true,
            })
        }
    }
}

/// Independent Otsu segmentation of both views of a pair.
pub fn segment_pair(pair: &DualViewPair) -> Result<(OtsuResult, OtsuResult)> {
    Ok((
        otsu_threshold(&pair.cc, OTSU_BINS)?,
        otsu_threshold(&pair.mlo, OTSU_BINS)?,
    ))
}

/// Just the masks, when the thresholds are not needed.
pub fn mask_pair(pair: &DualViewPair) -> Result<(BinaryMask, BinaryMask)> {
    let (cc, mlo) = segment_pair(pair)?;
    Ok((cc.mask, mlo.mask))
}
