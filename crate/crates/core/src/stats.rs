//! Distribution-level statistics over metric samples: descriptive
//! summaries, the two-sample Kolmogorov–Smirnov test, 1-D earth mover's
//! distance, and violin-plot data (kernel density on a fixed grid).

use crate::error::{Error, Result};
use crate::metrics::{MetricSample, SourceLabel};
use crate::postprocess::percentile_sorted;

use alloc::vec::Vec;

/// Summary in the shape of a descriptive-statistics table row set.
/// `std` is the sample (n − 1) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Always true here: sample standard deviation, flagged for readers.
    pub std_is_sample: bool,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    /// n == 1: std reported as 0 by convention.
    pub degenerate: bool,
}

/// Quartiles use the same linear-interpolation percentile rule as the
/// postprocessing clip.
pub fn describe(samples: &[f64]) -> Result<DescriptiveStats> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("describe"));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mean = samples.iter().sum::<f64>() / n as f64;
    let degenerate = n == 1;
    let std = if degenerate {
        0.0
    } else {
        let ss: f64 = samples.iter().map(|&v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (n - 1) as f64)
    };
    let q1 = percentile_sorted(&sorted, 25.0);
    let median = percentile_sorted(&sorted, 50.0);
    let q3 = percentile_sorted(&sorted, 75.0);
    Ok(DescriptiveStats {
        n,
        mean,
        std,
        std_is_sample: true,
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[n - 1],
        iqr: q3 - q1,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
}

/// Two-sample KS statistic and asymptotic p-value.
///
/// D is the supremum over the pooled sample points of the gap between
/// the right-continuous empirical CDFs. The p-value uses the asymptotic
/// Kolmogorov series with the small-sample correction
/// λ = (√n_e + 0.12 + 0.11/√n_e)·D, n_e = n_a·n_b/(n_a + n_b).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("ks_two_sample"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);

    let (na, nb) = (xs.len(), ys.len());
    let mut d: f64 = 0.0;
    let mut i = 0;
    let mut j = 0;
    while i < na || j < nb {
        // next pooled point
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < na && xs[i] <= x {
            i += 1;
        }
        while j < nb && ys[j] <= x {
            j += 1;
        }
        let fa = i as f64 / na as f64;
        let fb = j as f64 / nb as f64;
        d = d.max((fa - fb).abs());
    }

    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let sqrt_ne = libm::sqrt(ne);
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(KsResult {
        d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}, truncated when terms drop
/// below 1e-12, clamped to [0, 1].
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=1000u32 {
        let kk = k as f64;
        let term = 2.0 * libm::exp(-2.0 * kk * kk * lambda * lambda);
        if term < 1e-12 {
            break;
        }
        sum += sign * term;
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

/// 1-Wasserstein distance between the empirical distributions (equal
/// total mass 1): the area between the two ECDFs, computed exactly over
/// the pooled breakpoints.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("emd_1d"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);

    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut emd = 0.0;
    let mut prev: Option<f64> = None;
    while i < xs.len() || j < ys.len() {
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        if let Some(p) = prev {
            let fa = i as f64 / na;
            let fb = j as f64 / nb;
            emd += (fa - fb).abs() * (x - p);
        }
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        prev = Some(x);
    }
    Ok(emd)
}

/// Number of grid points for density curves.
pub const DENSITY_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Iou,
    Dsc,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Iou => "iou",
            MetricKind::Dsc => "dsc",
        }
    }
}

/// One violin: summary statistics plus a kernel-density curve on a fixed
/// 200-point grid over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDensity {
    pub source: SourceLabel,
    pub metric: MetricKind,
    pub stats: DescriptiveStats,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Violin/box data for both metrics of both groups, for external
/// plotting. Gaussian kernel with Silverman bandwidth.
pub fn plot_data(real: &[MetricSample], synthetic: &[MetricSample]) -> Result<Vec<GroupDensity>> {
    if real.is_empty() || synthetic.is_empty() {
        return Err(Error::EmptyInput("plot_data"));
    }
    let mut out = Vec::with_capacity(4);
    for (source, samples) in [
        (SourceLabel::Real, real),
        (SourceLabel::Synthetic, synthetic),
    ] {
        for metric in [MetricKind::Iou, MetricKind::Dsc] {
            let values: Vec<f64> = samples
                .iter()
                .map(|s| match metric {
                    MetricKind::Iou => s.iou,
                    MetricKind::Dsc => s.dsc,
                })
                .collect();
            out.push(group_density(source, metric, &values)?);
        }
    }
    Ok(out)
}

fn group_density(
    source: SourceLabel,
    metric: MetricKind,
    values: &[f64],
) -> Result<GroupDensity> {
    let stats = describe(values)?;
    let n = values.len() as f64;
    // Silverman: 0.9 · min(σ, IQR/1.34) · n^(−1/5), floored for
    // degenerate (constant) groups so the curve stays finite.
    let spread = stats.std.min(stats.iqr / 1.34);
    let mut bandwidth = 0.9 * spread * libm::pow(n, -0.2);
    if bandwidth <= 0.0 {
        bandwidth = 1e-3;
    }
    let grid: Vec<f64> = (0..DENSITY_GRID)
        .map(|i| i as f64 / (DENSITY_GRID - 1) as f64)
        .collect();
    let norm = 1.0 / (n * bandwidth * libm::sqrt(2.0 * core::f64::consts::PI));
    let density = grid
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for &v in values {
                let u = (x - v) / bandwidth;
                acc += libm::exp(-0.5 * u * u);
            }
            acc * norm
        })
        .collect();
    Ok(GroupDensity {
        source,
        metric,
        stats,
        bandwidth,
        grid,
        density,
    })
}
