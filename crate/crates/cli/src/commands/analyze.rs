//! Evaluation-side commands: postprocessing, segmentation, metric
//! extraction and the statistics report.

use crate::container;
use crate::manifest::{self, Manifest, ManifestEntry};
use crate::png_io;
use crate::report::{
    self, DistTestDoc, DistTestsDoc, GroupStatsDoc, GroupsDoc, MeanDifferenceDoc, PlotGroupDoc,
    StatsReportDoc, SummaryDoc,
};
use anyhow::{bail, Context, Result};
use clap::Args;
use dualview_core::metrics::{self, MetricSample, SourceLabel};
use dualview_core::postprocess::{percentile_clip_triple, ClipConfig};
use dualview_core::segmentation;
use dualview_core::stats;
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Args)]
pub struct PostprocessArgs {
    /// Directory of triple containers (manifest optional).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub lo: f64,
    #[arg(long, default_value_t = 99.5)]
    pub hi: f64,
    /// Keep clipped values on their original scale instead of remapping
    /// [lo, hi] to [0, 1].
    #[arg(long)]
    pub no_rescale: bool,
}

pub fn postprocess(args: PostprocessArgs) -> Result<()> {
    let cfg = ClipConfig {
        lo_percentile: args.lo,
        hi_percentile: args.hi,
        rescale: !args.no_rescale,
    };
    cfg.validate()?;
    let (man, dir) = manifest::load_dir(&args.input)?;
    std::fs::create_dir_all(&args.out)?;

    let entries: Vec<ManifestEntry> = man
        .entries
        .par_iter()
        .map(|entry| {
            let stem = entry
                .triple_stem
                .clone()
                .ok_or_else(|| anyhow::anyhow!("{}: not a triple container", entry.subject_id))?;
            let triple = container::load_triple(&dir, &stem)?;
            let (clipped, outcomes) = percentile_clip_triple(&triple, &cfg)?;
            for (c, o) in outcomes.iter().enumerate() {
                if o.degenerate {
                    eprintln!("{stem}: channel {c} degenerate after clip");
                }
            }
            container::save_triple(&args.out, &stem, &clipped).with_context(|| {
                format!("{stem}: clipped values must stay in [0, 1] to be stored")
            })?;
            Ok(entry.clone())
        })
        .collect::<Result<_>>()?;

    // provenance records stage parameters only; input paths would make
    // otherwise-identical outputs compare differently
    let mut out_manifest = Manifest::new(
        format!(
            "postprocess lo={} hi={} rescale={}",
            args.lo,
            args.hi,
            !args.no_rescale
        ),
        man.seed,
    );
    out_manifest.entries = entries;
    out_manifest.save(&args.out)?;
    println!(
        "postprocess: wrote {} triples to {}",
        out_manifest.entries.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct SegmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn segment(args: SegmentArgs) -> Result<()> {
    let (man, dir) = manifest::load_dir(&args.input)?;
    let pairs = man.load_pairs(&dir)?;
    std::fs::create_dir_all(&args.out)?;

    pairs
        .par_iter()
        .map(|pair| -> Result<()> {
            let (cc, mlo) = segmentation::segment_pair(pair)?;
            for (res, which) in [(&cc, "cc"), (&mlo, "mlo")] {
                if res.degenerate {
                    eprintln!("{}: {which} view degenerate under Otsu", pair.subject_id);
                }
            }
            let id = &pair.subject_id;
            png_io::save_mask(&cc.mask, &args.out.join(format!("{id}_cc_mask.png")))?;
            png_io::save_mask(&mlo.mask, &args.out.join(format!("{id}_mlo_mask.png")))?;
            Ok(())
        })
        .collect::<Result<()>>()?;
    println!(
        "segment: wrote {} mask pairs to {}",
        pairs.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Label recorded in the CSV: real | synthetic.
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let source = SourceLabel::parse(&args.source)
        .ok_or_else(|| anyhow::anyhow!("source must be 'real' or 'synthetic'"))?;
    let (man, dir) = manifest::load_dir(&args.input)?;
    let pairs = man.load_pairs(&dir)?;
    let outcome = metrics::evaluate_dataset(&pairs, source)?;
    for (id, err) in &outcome.failures {
        eprintln!("evaluate: {id} failed: {err}");
    }
    if outcome.samples.is_empty() {
        bail!("every pair failed evaluation");
    }
    report::write_metrics_csv(&outcome.samples, &args.out)?;
    println!(
        "evaluate: {} samples ({} failures) to {}",
        outcome.samples.len(),
        outcome.failures.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct StatsArgs {
    /// Metrics CSV for the real group.
    #[arg(long)]
    pub real: PathBuf,
    /// Metrics CSV for the synthetic group.
    #[arg(long)]
    pub synthetic: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    pub out: PathBuf,
}

fn values(samples: &[MetricSample], metric: impl Fn(&MetricSample) -> f64) -> Vec<f64> {
    samples.iter().map(metric).collect()
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let real = report::read_metrics_csv(&args.real)?;
    let synthetic = report::read_metrics_csv(&args.synthetic)?;
    if real.is_empty() || synthetic.is_empty() {
        bail!("both metric files must be nonempty");
    }

    let real_iou = values(&real, |s| s.iou);
    let real_dsc = values(&real, |s| s.dsc);
    let syn_iou = values(&synthetic, |s| s.iou);
    let syn_dsc = values(&synthetic, |s| s.dsc);

    let describe = |v: &[f64]| -> Result<SummaryDoc> {
        Ok(SummaryDoc::from(&stats::describe(v)?))
    };
    let dist = |a: &[f64], b: &[f64]| -> Result<DistTestDoc> {
        let ks = stats::ks_two_sample(a, b)?;
        Ok(DistTestDoc {
            ks_d: ks.d,
            ks_pvalue: ks.p_value,
            emd: stats::emd_1d(a, b)?,
        })
    };

    let groups = GroupsDoc {
        real: GroupStatsDoc {
            iou: describe(&real_iou)?,
            dsc: describe(&real_dsc)?,
        },
        synthetic: GroupStatsDoc {
            iou: describe(&syn_iou)?,
            dsc: describe(&syn_dsc)?,
        },
    };
    let report_doc = StatsReportDoc {
        mean_difference_vs_real: MeanDifferenceDoc {
            iou: groups.synthetic.iou.mean - groups.real.iou.mean,
            dsc: groups.synthetic.dsc.mean - groups.real.dsc.mean,
        },
        distribution_tests: DistTestsDoc {
            iou: dist(&real_iou, &syn_iou)?,
            dsc: dist(&real_dsc, &syn_dsc)?,
        },
        plot: stats::plot_data(&real, &synthetic)?
            .iter()
            .map(PlotGroupDoc::from)
            .collect(),
        groups,
    };
    report::write_json(&report_doc, &args.out)?;
    println!("stats: report written to {}", args.out.display());
    Ok(())
}
