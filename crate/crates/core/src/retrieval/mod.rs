//! Dataset ingestion, descriptor indexes, K-nearest queries and ARR evaluation.

mod dataset;
mod evaluate;
mod persist;

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::descriptor::{compute_descriptor, MultiscaleDescriptor, PipelineConfig};
use crate::imaging::load_image;
use crate::metric::multiscale_distance;
use crate::{Error, Result};

pub use dataset::{scan_dataset, DatasetManifest, Labeling, ManifestEntry};
pub use evaluate::{evaluate_arr, evaluate_with_distances, ArrReport, DistanceMatrix};
pub use persist::{load_index, read_index, save_index, write_index, INDEX_MAGIC};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: u64,
    pub label: String,
    pub descriptor: MultiscaleDescriptor,
}

/// Immutable collection of labeled descriptors plus the configuration that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorIndex {
    config: PipelineConfig,
    entries: Vec<IndexEntry>,
}

impl DescriptorIndex {
    /// Checks that the index is non-empty, ids are unique and every
    /// descriptor uses the configured scale list.
    pub fn new(config: PipelineConfig, entries: Vec<IndexEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dataset("an index needs at least one entry".into()));
        }
        let mut ids = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !ids.insert(e.id) {
                return Err(Error::Dataset(format!("duplicate image id {}", e.id)));
            }
            if e.descriptor.scales != config.scales || e.descriptor.matrices.len() != config.scales.len() {
                return Err(Error::IncompatibleDescriptors(format!(
                    "entry {} has scales {:?}, index uses {:?}",
                    e.id, e.descriptor.scales, config.scales
                )));
            }
        }
        Ok(Self { config, entries })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Computes a descriptor for every manifest image. Work is spread over the
/// current rayon pool; the result does not depend on the worker count.
/// Any failing image aborts the build, reporting the lowest failing id.
pub fn build_index(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<DescriptorIndex> {
    cfg.validate()?;
    let results: Vec<Result<IndexEntry>> = manifest
        .entries
        .par_iter()
        .map(|item| {
            let descriptor = load_image(&item.path)
                .and_then(|img| compute_descriptor(&img, cfg))
                .map_err(|e| Error::ImageFailed {
                    id: item.id,
                    path: item.path.clone(),
                    source: Box::new(e),
                })?;
            Ok(IndexEntry {
                id: item.id,
                label: item.label.clone(),
                descriptor,
            })
        })
        .collect();
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    DescriptorIndex::new(cfg.clone(), entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: u64,
    pub distance: f64,
}

/// Ascending by distance, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
}

pub(crate) fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id))
}

/// The `k` index entries closest to `probe`.
pub fn query(index: &DescriptorIndex, probe: &MultiscaleDescriptor, k: usize) -> Result<RankedResult> {
    if k == 0 || k > index.len() {
        return Err(Error::KOutOfRange { k, len: index.len() });
    }
    if probe.scales != index.config.scales {
        return Err(Error::IncompatibleDescriptors(format!(
            "probe scales {:?} differ from index scales {:?}",
            probe.scales, index.config.scales
        )));
    }
    let mut hits = index
        .entries
        .par_iter()
        .map(|e| {
            multiscale_distance(&e.descriptor, probe).map(|distance| Hit { id: e.id, distance })
        })
        .collect::<Result<Vec<_>>>()?;
    hits.sort_by(rank_order);
    hits.truncate(k);
    Ok(RankedResult { hits })
}
