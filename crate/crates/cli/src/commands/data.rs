//! Dataset-producing commands: phantom generation, preprocessing,
//! encoding.

use crate::container;
use crate::manifest::{Manifest, ManifestEntry};
use crate::png_io;
use crate::refcdf;
use anyhow::{Context, Result};
use clap::Args;
use dualview_core::codec;
use dualview_core::phantom::{self, PhantomConfig};
use dualview_core::preprocess::{self, PreprocessConfig, ReferenceCdf, ReferenceSource};
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Args)]
pub struct PhantomArgs {
    /// Number of pairs.
    #[arg(long, short = 'n')]
    pub n: usize,
    /// Square image side in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// CC/MLO silhouette correlation in [0, 1].
    #[arg(long, default_value_t = 0.8)]
    pub correlation: f64,
    #[arg(long, default_value_t = 2.0)]
    pub texture_scale: f64,
    #[arg(long, default_value_t = 0.25)]
    pub texture_amplitude: f64,
    /// Skip the pectoral-like wedge on the MLO view.
    #[arg(long)]
    pub no_wedge: bool,
}

pub fn phantom(args: PhantomArgs) -> Result<()> {
    let cfg = PhantomConfig {
        size: args.size,
        n_pairs: args.n,
        seed: args.seed,
        shape_correlation: args.correlation,
        texture_scale: args.texture_scale,
        texture_amplitude: args.texture_amplitude,
        pectoral_wedge: !args.no_wedge,
    };
    let pairs = phantom::generate(&cfg)?;
    std::fs::create_dir_all(&args.out)?;

    let mut manifest = Manifest::new(
        format!(
            "phantom size={} correlation={} texture_scale={} texture_amplitude={} wedge={}",
            args.size, args.correlation, args.texture_scale, args.texture_amplitude, !args.no_wedge
        ),
        Some(args.seed),
    );
    let entries: Vec<ManifestEntry> = pairs
        .par_iter()
        .map(|pair| {
            let stem = pair.subject_id.clone();
            let triple = codec::encode(pair)?;
            container::save_triple(&args.out, &stem, &triple)?;
            Ok(ManifestEntry {
                subject_id: stem.clone(),
                laterality: pair.laterality.as_str().to_string(),
                cc_path: format!("{stem}_cc.png"),
                mlo_path: format!("{stem}_mlo.png"),
                diff_path: Some(format!("{stem}_diff.png")),
                triple_stem: Some(stem),
            })
        })
        .collect::<Result<_>>()?;
    manifest.entries = entries;
    manifest.save(&args.out)?;
    println!(
        "phantom: wrote {} triple containers to {}",
        pairs.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct PreprocessArgs {
    /// Manifest of the raw paired dataset.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Reference-CDF file; defaults to the first image of the dataset.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
}

pub fn preprocess(args: PreprocessArgs) -> Result<()> {
    let (manifest, dir) = Manifest::load(&args.manifest)?;
    let pairs = manifest.load_pairs(&dir)?;
    if pairs.is_empty() {
        anyhow::bail!("manifest has no entries");
    }

    let (reference, reference_desc) = match &args.reference {
        Some(path) => (refcdf::load(path)?, "file".to_string()),
        None => (
            ReferenceCdf::from_image(&pairs[0].cc)
                .context("building reference CDF from the first image")?,
            "first-image".to_string(),
        ),
    };
    let cfg = PreprocessConfig {
        target_size: args.size,
        reference: ReferenceSource::Fixed(reference.clone()),
        flip_left: true,
    };

    std::fs::create_dir_all(&args.out)?;
    let entries: Vec<ManifestEntry> = pairs
        .into_par_iter()
        .map(|pair| {
            let id = pair.subject_id.clone();
            let done = preprocess::preprocess_pair(pair, &cfg, &reference)
                .map_err(|e| anyhow::anyhow!("subject {id}: {e}"))?;
            let cc_path = format!("{id}_cc.png");
            let mlo_path = format!("{id}_mlo.png");
            png_io::save_gray16(&done.cc, &args.out.join(&cc_path))?;
            png_io::save_gray16(&done.mlo, &args.out.join(&mlo_path))?;
            Ok(ManifestEntry {
                subject_id: id,
                laterality: done.laterality.as_str().to_string(),
                cc_path,
                mlo_path,
                diff_path: None,
                triple_stem: None,
            })
        })
        .collect::<Result<_>>()?;

    let mut out_manifest = Manifest::new(
        format!("preprocessed size={} reference={}", args.size, reference_desc),
        manifest.seed,
    );
    out_manifest.entries = entries;
    out_manifest.save(&args.out)?;
    println!(
        "preprocess: wrote {} pairs to {}",
        out_manifest.entries.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write lossy 8-bit RGB previews.
    #[arg(long)]
    pub preview: bool,
}

pub fn encode(args: EncodeArgs) -> Result<()> {
    let (manifest, dir) = Manifest::load(&args.manifest)?;
    let pairs = manifest.load_pairs(&dir)?;
    std::fs::create_dir_all(&args.out)?;

    let entries: Vec<ManifestEntry> = pairs
        .par_iter()
        .map(|pair| {
            let triple = codec::encode(pair)?;
            let stem = pair.subject_id.clone();
            container::save_triple(&args.out, &stem, &triple)?;
            if args.preview {
                png_io::save_preview_rgb(&triple, &args.out.join(format!("{stem}_preview.png")))?;
            }
            Ok(ManifestEntry {
                subject_id: stem.clone(),
                laterality: pair.laterality.as_str().to_string(),
                cc_path: format!("{stem}_cc.png"),
                mlo_path: format!("{stem}_mlo.png"),
                diff_path: Some(format!("{stem}_diff.png")),
                triple_stem: Some(stem),
            })
        })
        .collect::<Result<_>>()?;

    let mut out_manifest = Manifest::new("encoded", manifest.seed);
    out_manifest.entries = entries;
    out_manifest.save(&args.out)?;
    println!(
        "encode: wrote {} triples to {}",
        out_manifest.entries.len(),
        args.out.display()
    );
    Ok(())
}
