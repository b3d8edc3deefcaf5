//! Percentile-based cleanup of generated images: clip intensities at the
//! 0.5th and 99.5th percentiles, optionally rescaling the kept range back
//! to [0, 1].

use crate::error::{Error, Result};
use crate::image::{EncodedTriple, GrayImage};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig {
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub rescale: bool,
}

impl Default for ClipConfig {
    fn default() -> Self {
        ClipConfig {
            lo_percentile: 0.5,
            hi_percentile: 99.5,
            rescale: true,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.lo_percentile)
            || !(0.0..=100.0).contains(&self.hi_percentile)
            || self.lo_percentile >= self.hi_percentile
        {
            return Err(Error::InvalidArgument(
                "percentiles must satisfy 0 <= lo < hi <= 100",
            ));
        }
        Ok(())
    }
}

/// What a clip pass did to one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipOutcome {
    pub lo: f64,
    pub hi: f64,
    /// lo == hi: the channel was constant, output forced to zero.
    pub degenerate: bool,
}

/// Linear-interpolation percentile: rank = p/100 × (n − 1) over the
/// sorted values, interpolating between the bracketing ranks.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument("percentile must be in [0, 100]"));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

/// Same rule on an already-sorted slice.
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn clip_plane(pixels: &[f64], cfg: &ClipConfig) -> Result<(Vec<f64>, ClipOutcome)> {
    let mut sorted: Vec<f64> = pixels.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, cfg.lo_percentile);
    let hi = percentile_sorted(&sorted, cfg.hi_percentile);
    if lo == hi {
        let outcome = ClipOutcome {
            lo,
            hi,
            degenerate: true,
        };
        return Ok((alloc::vec![0.0; pixels.len()], outcome));
    }
    let out = pixels
        .iter()
        .map(|&v| {
            let c = v.clamp(lo, hi);
            if cfg.rescale {
                (c - lo) / (hi - lo)
            } else {
                c
            }
        })
        .collect();
    Ok((
        out,
        ClipOutcome {
            lo,
            hi,
            degenerate: false,
        },
    ))
}

/// Clip one grayscale image.
pub fn percentile_clip(img: &GrayImage, cfg: &ClipConfig) -> Result<(GrayImage, ClipOutcome)> {
    cfg.validate()?;
    if img.pixels().is_empty() {
        return Err(Error::EmptyInput("percentile_clip"));
    }
    let (pixels, outcome) = clip_plane(img.pixels(), cfg)?;
    Ok((GrayImage::new(img.width(), img.height(), pixels)?, outcome))
}

/// Clip each channel of a triple independently; the difference channel
/// has very different statistics from the views, so percentiles are
/// never pooled across channels.
pub fn percentile_clip_triple(
    triple: &EncodedTriple,
    cfg: &ClipConfig,
) -> Result<(EncodedTriple, [ClipOutcome; 3])> {
    cfg.validate()?;
    let (r, o0) = clip_plane(triple.plane(0), cfg)?;
    let (g, o1) = clip_plane(triple.plane(1), cfg)?;
    let (b, o2) = clip_plane(triple.plane(2), cfg)?;
    Ok((
        EncodedTriple::from_raw(triple.width(), triple.height(), [r, g, b])?,
        [o0, o1, o2],
    ))
}
