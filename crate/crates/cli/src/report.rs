//! Flat numeric tables (CSV) and structured reports (JSON): training
//! loss curves, per-pair metric samples, and the statistics report with
//! descriptive summaries, distribution tests and violin-plot data.

use anyhow::{bail, Context, Result};
use dualview_core::metrics::{MetricSample, SourceLabel};
use dualview_core::stats::{DescriptiveStats, GroupDensity};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const METRICS_CSV_HEADER: &str = "subject_id,source,iou,dsc,degenerate";

/// Write metric samples as `subject_id,source,iou,dsc,degenerate`.
pub fn write_metrics_csv(samples: &[MetricSample], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.subject_id,
            s.source.as_str(),
            s.iou,
            s.dsc,
            s.degenerate
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricSample>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == METRICS_CSV_HEADER => {}
        other => bail!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            METRICS_CSV_HEADER,
            other
        ),
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("{}:{}: expected 5 fields", path.display(), lineno + 2);
        }
        let source = SourceLabel::parse(fields[1])
            .ok_or_else(|| anyhow::anyhow!("{}:{}: bad source", path.display(), lineno + 2))?;
        samples.push(MetricSample {
            subject_id: fields[0].to_string(),
            source,
            iou: fields[2].parse()?,
            dsc: fields[3].parse()?,
            degenerate: fields[4].parse()?,
        });
    }
    Ok(samples)
}

/// Loss curve as `epoch,mean_loss`.
pub fn write_losses_csv(losses: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,mean_loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        out.push_str(&format!("{epoch},{loss}\n"));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReportDoc {
    pub seed: u64,
    pub epochs: usize,
    pub steps: u64,
    pub epoch_losses: Vec<f64>,
    /// Wall time is environment-dependent and excluded from
    /// reproducibility comparisons.
    pub wall_time_secs: f64,
    pub checkpoint: String,
}

/// Table-row shape shared by the report and the plot summaries.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryDoc {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub std_is_sample: bool,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub degenerate: bool,
}

impl From<&DescriptiveStats> for SummaryDoc {
    fn from(d: &DescriptiveStats) -> Self {
        SummaryDoc {
            n: d.n,
            mean: d.mean,
            std: d.std,
            std_is_sample: d.std_is_sample,
            min: d.min,
            q1: d.q1,
            median: d.median,
            q3: d.q3,
            max: d.max,
            iqr: d.iqr,
            degenerate: d.degenerate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupStatsDoc {
    pub iou: SummaryDoc,
    pub dsc: SummaryDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanDifferenceDoc {
    pub iou: f64,
    pub dsc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DistTestDoc {
    pub ks_d: f64,
    pub ks_pvalue: f64,
    pub emd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlotGroupDoc {
    pub source: String,
    pub metric: String,
    pub summary: SummaryDoc,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl From<&GroupDensity> for PlotGroupDoc {
    fn from(g: &GroupDensity) -> Self {
        PlotGroupDoc {
            source: g.source.as_str().to_string(),
            metric: g.metric.as_str().to_string(),
            summary: SummaryDoc::from(&g.stats),
            bandwidth: g.bandwidth,
            grid: g.grid.clone(),
            density: g.density.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DistTestsDoc {
    pub iou: DistTestDoc,
    pub dsc: DistTestDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupsDoc {
    pub real: GroupStatsDoc,
    pub synthetic: GroupStatsDoc,
}

/// The full statistics report: descriptive rows per group, the
/// synthetic-minus-real mean difference, the two-sample tests, and
/// violin data for plotting.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatsReportDoc {
    pub groups: GroupsDoc,
    pub mean_difference_vs_real: MeanDifferenceDoc,
    pub distribution_tests: DistTestsDoc,
    pub plot: Vec<PlotGroupDoc>,
}

pub fn write_json<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(doc)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
