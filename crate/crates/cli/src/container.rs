//! Lossless triple container: three linked 16-bit grayscale PNGs named
//! `<stem>_cc.png`, `<stem>_mlo.png`, `<stem>_diff.png`.

use crate::png_io;
use anyhow::{bail, Context, Result};
use dualview_core::image::{EncodedTriple, GrayImage};
use std::path::{Path, PathBuf};

pub struct TriplePaths {
    pub cc: PathBuf,
    pub mlo: PathBuf,
    pub diff: PathBuf,
}

pub fn triple_paths(dir: &Path, stem: &str) -> TriplePaths {
    TriplePaths {
        cc: dir.join(format!("{stem}_cc.png")),
        mlo: dir.join(format!("{stem}_mlo.png")),
        diff: dir.join(format!("{stem}_diff.png")),
    }
}

/// Write the three planes; every plane must be unit-range.
pub fn save_triple(dir: &Path, stem: &str, triple: &EncodedTriple) -> Result<TriplePaths> {
    let paths = triple_paths(dir, stem);
    for (idx, path) in [(0, &paths.cc), (1, &paths.mlo), (2, &paths.diff)] {
        let plane = GrayImage::new(
            triple.width(),
            triple.height(),
            triple.plane(idx).to_vec(),
        )?;
        png_io::save_gray16(&plane, path)
            .with_context(|| format!("writing plane {idx} of {stem}"))?;
    }
    Ok(paths)
}

pub fn load_triple(dir: &Path, stem: &str) -> Result<EncodedTriple> {
    let paths = triple_paths(dir, stem);
    let cc = png_io::load_gray16(&paths.cc)?;
    let mlo = png_io::load_gray16(&paths.mlo)?;
    let diff = png_io::load_gray16(&paths.diff)?;
    if cc.dims() != mlo.dims() || cc.dims() != diff.dims() {
        bail!("triple {stem}: planes have mismatched dimensions");
    }
    Ok(EncodedTriple::from_planes(cc, mlo, diff)?)
}

/// Stems of complete triple containers under `dir`, sorted.
pub fn scan_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix("_cc.png") {
            let p = triple_paths(dir, stem);
            if p.mlo.exists() && p.diff.exists() {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}
