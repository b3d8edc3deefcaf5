//! Dataset manifest: one JSON document per directory listing subject
//! ids, laterality and file paths (relative to the manifest location).

use crate::png_io;
use anyhow::{bail, Context, Result};
use dualview_core::codec::{DualViewPair, Laterality};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub laterality: String,
    pub cc_path: String,
    pub mlo_path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diff_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub triple_stem: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub provenance: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(provenance: impl Into<String>, seed: Option<u64>) -> Self {
        Manifest {
            seed,
            provenance: provenance.into(),
            entries: Vec::new(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Load and validate: unique subject ids, referenced files present.
    pub fn load(path: &Path) -> Result<(Manifest, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let dir = path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));

        let mut seen = BTreeSet::new();
        for e in &manifest.entries {
            if !seen.insert(e.subject_id.clone()) {
                bail!("duplicate subject_id {:?} in manifest", e.subject_id);
            }
            if Laterality::parse(&e.laterality).is_none() {
                bail!(
                    "subject {:?}: unknown laterality {:?}",
                    e.subject_id,
                    e.laterality
                );
            }
            for rel in [Some(&e.cc_path), Some(&e.mlo_path), e.diff_path.as_ref()]
                .into_iter()
                .flatten()
            {
                let p = dir.join(rel);
                if !p.exists() {
                    bail!("manifest references missing file {}", p.display());
                }
            }
        }
        Ok((manifest, dir))
    }

    /// Load every referenced pair as unit-normalized images.
    pub fn load_pairs(&self, dir: &Path) -> Result<Vec<DualViewPair>> {
        self.entries
            .iter()
            .map(|e| {
                let cc = png_io::load_gray16(&dir.join(&e.cc_path))
                    .with_context(|| format!("subject {}", e.subject_id))?;
                let mlo = png_io::load_gray16(&dir.join(&e.mlo_path))
                    .with_context(|| format!("subject {}", e.subject_id))?;
                let laterality = Laterality::parse(&e.laterality)
                    .ok_or_else(|| anyhow::anyhow!("bad laterality for {}", e.subject_id))?;
                Ok(DualViewPair::new(cc, mlo, laterality, e.subject_id.clone())?)
            })
            .collect()
    }
}

/// Manifest if present, otherwise synthesize entries by scanning for
/// triple containers.
pub fn load_dir(dir: &Path) -> Result<(Manifest, PathBuf)> {
    let manifest_path = dir.join(MANIFEST_NAME);
    if manifest_path.exists() {
        return Manifest::load(&manifest_path);
    }
    let stems = crate::container::scan_stems(dir)?;
    if stems.is_empty() {
        bail!(
            "{}: no manifest.json and no triple containers found",
            dir.display()
        );
    }
    let mut manifest = Manifest::new("scanned", None);
    for stem in stems {
        manifest.entries.push(ManifestEntry {
            subject_id: stem.clone(),
            laterality: "right-oriented".into(),
            cc_path: format!("{stem}_cc.png"),
            mlo_path: format!("{stem}_mlo.png"),
            diff_path: Some(format!("{stem}_diff.png")),
            triple_stem: Some(stem),
        });
    }
    Ok((manifest, dir.to_path_buf()))
}
