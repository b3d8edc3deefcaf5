//! Reference-CDF file: 65536 ascending floating-point values, one per
//! line, final value 1.0.

use anyhow::{Context, Result};
use dualview_core::preprocess::{ReferenceCdf, CDF_BINS};
use std::path::Path;

pub fn load(path: &Path) -> Result<ReferenceCdf> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::with_capacity(CDF_BINS);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: not a number", path.display(), lineno + 1))?;
        values.push(v);
    }
    ReferenceCdf::new(values).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn save(cdf: &ReferenceCdf, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(CDF_BINS * 20);
    for v in cdf.values() {
        out.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
