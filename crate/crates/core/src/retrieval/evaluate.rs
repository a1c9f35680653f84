use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::dataset::uniform_count;
use super::{rank_order, DescriptorIndex, Hit};
use crate::metric::multiscale_distance;
use crate::{Error, Result};

/// Symmetric all-pairs distance matrix over an index, in entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Computes the upper triangle in parallel and mirrors it, so the matrix
    /// is exactly symmetric with a zero diagonal.
    pub fn compute(index: &DescriptorIndex) -> Result<Self> {
        let entries = index.entries();
        let n = entries.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| multiscale_distance(&entries[i].descriptor, &entries[j].descriptor))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (off, &d) in row.iter().enumerate() {
                let j = i + 1 + off;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Average retrieval rate at a fixed K, overall and per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrReport {
    pub k: usize,
    pub arr: f64,
    pub per_class: BTreeMap<String, f64>,
    /// Images per class. When classes differ in size each query is normalized
    /// by the size of its own class.
    pub class_sizes: BTreeMap<String, usize>,
    pub uniform_relevant: bool,
}

impl ArrReport {
    /// `class,rate` CSV with a final `ARR,<value>` row, six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,rate\n");
        for (class, rate) in &self.per_class {
            let _ = writeln!(out, "{class},{rate:.6}");
        }
        let _ = writeln!(out, "ARR,{:.6}", self.arr);
        out
    }
}

/// Queries every entry against the whole index (itself included) and counts
/// same-class images among the top `k`.
pub fn evaluate_arr(index: &DescriptorIndex, k: usize) -> Result<ArrReport> {
    if k == 0 || k > index.len() {
        return Err(Error::KOutOfRange { k, len: index.len() });
    }
    let distances = DistanceMatrix::compute(index)?;
    evaluate_with_distances(index, &distances, k)
}

/// Same as [`evaluate_arr`] with a precomputed distance matrix.
pub fn evaluate_with_distances(index: &DescriptorIndex, distances: &DistanceMatrix, k: usize) -> Result<ArrReport> {
    let entries = index.entries();
    let n = entries.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, len: n });
    }
    if distances.len() != n {
        return Err(Error::DimensionMismatch {
            left: distances.len(),
            right: n,
        });
    }
    let mut class_sizes = BTreeMap::new();
    for e in entries {
        *class_sizes.entry(e.label.clone()).or_insert(0usize) += 1;
    }

    let rates: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|q| {
            let mut hits: Vec<(Hit, usize)> = distances
                .row(q)
                .iter()
                .zip(entries)
                .enumerate()
                .map(|(pos, (&distance, e))| (Hit { id: e.id, distance }, pos))
                .collect();
            hits.select_nth_unstable_by(k - 1, |a, b| rank_order(&a.0, &b.0));
            let label = &entries[q].label;
            let relevant = hits[..k].iter().filter(|(_, pos)| &entries[*pos].label == label).count();
            relevant as f64 / class_sizes[label] as f64
        })
        .collect();

    let arr = rates.iter().sum::<f64>() / n as f64;
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (e, rate) in entries.iter().zip(&rates) {
        *sums.entry(e.label.clone()).or_insert(0.0) += rate;
    }
    let per_class = sums
        .into_iter()
        .map(|(label, sum)| {
            let size = class_sizes[&label] as f64;
            (label, sum / size)
        })
        .collect();
    Ok(ArrReport {
        k,
        arr,
        per_class,
        uniform_relevant: uniform_count(&class_sizes).is_some(),
        class_sizes,
    })
}
