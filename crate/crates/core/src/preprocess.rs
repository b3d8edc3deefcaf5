//! Preprocessing chain for dual-view pairs: unit normalization,
//! laterality flip, histogram matching against a shared reference, and
//! bilinear resize to the working resolution.

use crate::codec::{DualViewPair, Laterality};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use alloc::vec;
use alloc::vec::Vec;

/// Intensity bins for histogram matching: one per uint16 code.
pub const CDF_BINS: usize = 65536;

/// Cumulative distribution over `CDF_BINS` uniform bins spanning [0, 1].
/// Nondecreasing with final value 1; a reference with all mass in a
/// single bin is rejected rather than silently flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCdf {
    values: Vec<f64>,
}

impl ReferenceCdf {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != CDF_BINS {
            return Err(Error::LengthMismatch {
                expected: CDF_BINS,
                got: values.len(),
            });
        }
        let mut prev = 0.0;
        for &v in &values {
            if v < prev - 1e-12 {
                return Err(Error::InvalidArgument("reference CDF must be nondecreasing"));
            }
            prev = v;
        }
        let last = *values.last().unwrap();
        if (last - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("reference CDF must end at 1.0"));
        }
        // count bins where the CDF actually increases
        let mut steps = 0usize;
        let mut prev = 0.0;
        for &v in &values {
            if v > prev + 1e-15 {
                steps += 1;
            }
            prev = v;
        }
        if steps <= 1 {
            return Err(Error::DegenerateReference);
        }
        Ok(ReferenceCdf { values })
    }

    /// Empirical CDF of an image's intensities.
    pub fn from_image(img: &GrayImage) -> Result<Self> {
        ReferenceCdf::new(image_cdf(img))
    }

    /// CDF of the uniform distribution on [0, 1].
    pub fn uniform() -> Self {
        let values = (0..CDF_BINS)
            .map(|b| (b + 1) as f64 / CDF_BINS as f64)
            .collect();
        ReferenceCdf { values }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest bin whose cumulative mass reaches `p`.
    fn inverse_bin(&self, p: f64) -> usize {
        let idx = self.values.partition_point(|&v| v < p);
        idx.min(CDF_BINS - 1)
    }
}

#[inline]
fn intensity_bin(v: f64) -> usize {
    let b = libm::round(v.clamp(0.0, 1.0) * (CDF_BINS - 1) as f64) as usize;
    b.min(CDF_BINS - 1)
}

/// Empirical CDF over the 65536 uniform bins (values, not a `ReferenceCdf`,
/// so degenerate sources are representable).
pub fn image_cdf(img: &GrayImage) -> Vec<f64> {
    let mut counts = vec![0u64; CDF_BINS];
    for &v in img.pixels() {
        counts[intensity_bin(v)] += 1;
    }
    let n = img.pixels().len() as f64;
    let mut acc = 0u64;
    counts
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect()
}

/// Which reference the histogram-matching stage uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    /// Use the first image of the dataset (resolved by the caller).
    FirstImage,
    Fixed(ReferenceCdf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub target_size: usize,
    pub reference: ReferenceSource,
    pub flip_left: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_size: 256,
            reference: ReferenceSource::FirstImage,
            flip_left: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_size < 8 {
            return Err(Error::InvalidArgument("target_size must be at least 8"));
        }
        Ok(())
    }
}

/// Stages of `preprocess_pair`, in contract order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Normalize,
    Orient,
    HistogramMatch,
    Resize,
}

/// raw / max_value, elementwise.
pub fn normalize_unit(width: usize, height: usize, raw: &[u32], max_value: u32) -> Result<GrayImage> {
    if max_value == 0 {
        return Err(Error::InvalidArgument("max_value must be positive"));
    }
    if raw.len() != width * height {
        return Err(Error::LengthMismatch {
            expected: width * height,
            got: raw.len(),
        });
    }
    let mut pixels = Vec::with_capacity(raw.len());
    for &v in raw {
        if v > max_value {
            return Err(Error::ValueAboveMax {
                value: v,
                max: max_value,
            });
        }
        pixels.push(v as f64 / max_value as f64);
    }
    GrayImage::new(width, height, pixels)
}

/// Mirror left-laterality pairs so every pair shares the right-breast
/// orientation. Idempotent: already-oriented pairs pass through.
pub fn orient(pair: DualViewPair) -> DualViewPair {
    match pair.laterality {
        Laterality::Left => DualViewPair {
            cc: pair.cc.hflip(),
            mlo: pair.mlo.hflip(),
            laterality: Laterality::RightOriented,
            subject_id: pair.subject_id,
        },
        Laterality::Right | Laterality::RightOriented => pair,
    }
}

/// Classical CDF matching over 65536 bins:
/// `out = inverse_reference_cdf(source_cdf(v))`.
///
/// Monotone in the input intensities; a constant image stays constant.
pub fn histogram_match(img: &GrayImage, reference: &ReferenceCdf) -> Result<GrayImage> {
    let src = image_cdf(img);
    // per-bin lookup table, monotone because both CDFs are
    let mut lut = vec![0.0f64; CDF_BINS];
    for (b, slot) in lut.iter_mut().enumerate() {
        let r = reference.inverse_bin(src[b]);
        *slot = r as f64 / (CDF_BINS - 1) as f64;
    }
    Ok(img.map(|v| lut[intensity_bin(v)]))
}

/// Bilinear resize with pixel-center sampling. Constant images stay
/// constant; resizing to the same size is the identity.
pub fn resize(img: &GrayImage, target: usize) -> Result<GrayImage> {
    if target == 0 {
        return Err(Error::InvalidArgument("resize target must be at least 1"));
    }
    let (w, h) = img.dims();
    let sx = w as f64 / target as f64;
    let sy = h as f64 / target as f64;
    let mut pixels = Vec::with_capacity(target * target);
    for dr in 0..target {
        let fy = ((dr as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = libm::floor(fy) as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for dc in 0..target {
            let fx = ((dc as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = libm::floor(fx) as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let top = img.get(y0, x0) * (1.0 - tx) + img.get(y0, x1) * tx;
            let bot = img.get(y1, x0) * (1.0 - tx) + img.get(y1, x1) * tx;
            pixels.push(top * (1.0 - ty) + bot * ty);
        }
    }
    GrayImage::new(target, target, pixels)
}

/// Full per-pair chain in contract order:
/// normalize → orient → histogram match → resize.
///
/// Views arrive unit-normalized from the loader, so the normalize stage
/// here validates the range rather than rescaling. Both views are
/// matched against the same reference.
pub fn preprocess_pair(
    pair: DualViewPair,
    cfg: &PreprocessConfig,
    reference: &ReferenceCdf,
) -> Result<DualViewPair> {
    preprocess_pair_traced(pair, cfg, reference, &mut |_| {})
}

/// Same as [`preprocess_pair`] but reports each stage as it runs, letting
/// tests pin the pipeline order.
pub fn preprocess_pair_traced(
    pair: DualViewPair,
    cfg: &PreprocessConfig,
    reference: &ReferenceCdf,
    trace: &mut dyn FnMut(Stage),
) -> Result<DualViewPair> {
    cfg.validate()?;

    trace(Stage::Normalize);
    if !pair.cc.in_unit_range() || !pair.mlo.in_unit_range() {
        return Err(Error::PixelOutOfRange);
    }

    trace(Stage::Orient);
    let pair = if cfg.flip_left { orient(pair) } else { pair };

    trace(Stage::HistogramMatch);
    let cc = histogram_match(&pair.cc, reference)?;
    let mlo = histogram_match(&pair.mlo, reference)?;

    trace(Stage::Resize);
    let cc = resize(&cc, cfg.target_size)?;
    let mlo = resize(&mlo, cfg.target_size)?;

    DualViewPair::new(cc, mlo, pair.laterality, pair.subject_id)
}
