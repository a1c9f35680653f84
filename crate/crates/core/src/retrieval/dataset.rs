use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use walkdir::WalkDir;

use crate::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["ppm", "pnm", "pgm", "png"];

/// How class labels are derived from file locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// Class is the name of the directory containing the image.
    Subdir,
    /// Class is the file stem with a trailing `.NNNN` index removed, as in
    /// `Bark.0003.ppm`.
    Stem,
}

impl FromStr for Labeling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subdir" => Ok(Self::Subdir),
            "stem" => Ok(Self::Stem),
            other => Err(Error::InvalidParameter(format!(
                "unknown labeling rule {other:?} (expected \"subdir\" or \"stem\")"
            ))),
        }
    }
}

impl fmt::Display for Labeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Subdir => "subdir",
            Self::Stem => "stem",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: u64,
    pub path: PathBuf,
    pub label: String,
}

/// Labeled image list, sorted by path. Ids are positions in that order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    /// Builds a manifest from `(path, label)` pairs, assigning ids in order.
    pub fn from_labeled(items: impl IntoIterator<Item = (PathBuf, String)>) -> Result<Self> {
        let entries: Vec<ManifestEntry> = items
            .into_iter()
            .enumerate()
            .map(|(i, (path, label))| ManifestEntry {
                id: i as u64,
                path,
                label,
            })
            .collect();
        if entries.is_empty() {
            return Err(Error::Dataset("no images found".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = entries.iter().find(|e| !seen.insert(&e.path)) {
            return Err(Error::Dataset(format!("duplicate path {}", dup.path.display())));
        }
        let mut manifest = Self {
            entries,
            warnings: Vec::new(),
        };
        manifest.warnings = manifest
            .class_counts()
            .into_iter()
            .filter(|&(_, n)| n < 2)
            .map(|(label, _)| format!("class {label:?} has a single image; it has no other relevant match"))
            .collect();
        Ok(manifest)
    }

    /// N_t
    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.label.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// N_c
    pub fn class_count(&self) -> usize {
        self.class_counts().len()
    }

    /// N_R when every class has the same size.
    pub fn relevant_count(&self) -> Option<usize> {
        uniform_count(&self.class_counts())
    }
}

pub(crate) fn uniform_count(counts: &BTreeMap<String, usize>) -> Option<usize> {
    let mut sizes = counts.values();
    let first = *sizes.next()?;
    sizes.all(|&n| n == first).then_some(first)
}

fn stem_label(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    Some(match stem.rsplit_once('.') {
        Some((base, idx)) if !base.is_empty() && !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => {
            base.to_string()
        }
        _ => stem.to_string(),
    })
}

fn subdir_label(path: &Path) -> Option<String> {
    Some(path.parent()?.file_name()?.to_str()?.to_string())
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Walks `root` recursively and labels every PPM/PGM/PNG file found.
pub fn scan_dataset(root: impl AsRef<Path>, labeling: Labeling) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a readable directory", root.display())));
    }
    let mut items = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Dataset(e.to_string()))?;
        if !entry.file_type().is_file() || !is_image(entry.path()) {
            continue;
        }
        let path = entry.into_path();
        let label = match labeling {
            Labeling::Subdir => subdir_label(&path),
            Labeling::Stem => stem_label(&path),
        }
        .ok_or_else(|| Error::Dataset(format!("cannot derive a label for {}", path.display())))?;
        items.push((path, label));
    }
    if items.is_empty() {
        return Err(Error::Dataset(format!("no images found in {}", root.display())));
    }
    items.sort_by(|a, b| a.0.cmp(&b.0));
    DatasetManifest::from_labeled(items)
}
