//! Labeled sparse datasets: storage, statistics, file I/O, synthetic
//! generators and weighted subsampling.

mod libsvm;
mod sampling;
mod synthetic;

use std::collections::BTreeMap;

use crate::error::{arg, Result};

pub use libsvm::{load_libsvm, parse_libsvm, save_libsvm, write_libsvm};
pub use sampling::{uniform_sample, weighted_sample, weighted_sample_from};
pub use synthetic::{
    checkerboard_label, friedman_surface, gen_almost_separable, gen_checkerboard,
    gen_friedman_regression, gen_ringnorm, gen_separable, gen_twonorm, TWONORM_MEAN,
};

/// Sparse feature vector with 1-based, strictly increasing indices.
///
/// The squared Euclidean norm is computed once at construction; kernels
/// rely on it.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    entries: Vec<(u32, f64)>,
    sq_norm: f64,
}

impl SparseVec {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        let mut prev = 0u32;
        for &(idx, val) in &entries {
            if idx == 0 {
                return arg("feature indices are 1-based");
            }
            if idx <= prev {
                return arg(format!("feature index {idx} does not increase"));
            }
            if !val.is_finite() {
                return arg(format!("feature {idx} is not finite"));
            }
            prev = idx;
        }
        Ok(Self::from_sorted_unchecked(entries))
    }

    pub(crate) fn from_sorted_unchecked(entries: Vec<(u32, f64)>) -> Self {
        let sq_norm = entries.iter().map(|&(_, v)| v * v).sum();
        Self { entries, sq_norm }
    }

    /// Builds a sparse vector from dense coordinates, dropping exact zeros.
    /// Coordinate `j` of the slice becomes feature index `j + 1`.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, &v)| (j as u32 + 1, v))
            .collect();
        Self::from_sorted_unchecked(entries)
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new(), sq_norm: 0.0 }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    pub fn norm(&self) -> f64 {
        self.sq_norm.sqrt()
    }

    /// Largest feature index, 0 for the empty vector.
    pub fn max_index(&self) -> u32 {
        self.entries.last().map_or(0, |&(i, _)| i)
    }

    /// Value at 1-based index `idx`, zero when absent.
    pub fn get(&self, idx: u32) -> f64 {
        self.entries
            .binary_search_by_key(&idx, |&(i, _)| i)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dense copy of the first `d` coordinates.
    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for &(i, v) in &self.entries {
            if (i as usize) <= d {
                out[i as usize - 1] = v;
            }
        }
        out
    }
}

/// How labels are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    /// Labels are +1 / -1.
    Binary,
    /// Labels are arbitrary finite reals.
    Real,
}

#[derive(Clone, Debug)]
pub struct SparseDataset {
    examples: Vec<SparseVec>,
    labels: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    kind: LabelKind,
}

impl SparseDataset {
    /// Builds a dataset with unit weights. Binary datasets must carry only
    /// +1 / -1 labels.
    pub fn new(examples: Vec<SparseVec>, labels: Vec<f64>, kind: LabelKind) -> Result<Self> {
        if examples.len() != labels.len() {
            return arg(format!(
                "{} examples but {} labels",
                examples.len(),
                labels.len()
            ));
        }
        for (i, &y) in labels.iter().enumerate() {
            if !y.is_finite() {
                return arg(format!("label of example {i} is not finite"));
            }
            if kind == LabelKind::Binary && y != 1.0 && y != -1.0 {
                return arg(format!("label {y} of example {i} is not +1/-1"));
            }
        }
        let dim = examples.iter().map(|x| x.max_index() as usize).max().unwrap_or(0);
        let weights = vec![1.0; examples.len()];
        Ok(Self { examples, labels, weights, dim, kind })
    }

    /// Replaces the sampling weights. All must be positive and finite.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return arg("weight vector length differs from dataset size");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return arg("weights must be positive and finite");
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn x(&self, i: usize) -> &SparseVec {
        &self.examples[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn examples(&self) -> &[SparseVec] {
        &self.examples
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// New dataset holding the given examples (in the given order), weights reset to 1.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return arg(format!("index {bad} out of range for {} examples", self.len()));
        }
        let examples = indices.iter().map(|&i| self.examples[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(examples, labels, self.kind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    /// L = max_i ||x_i||.
    pub max_norm: f64,
    /// Present for binary datasets only.
    pub class_counts: Option<BTreeMap<i32, usize>>,
}

pub fn stats(ds: &SparseDataset) -> Result<DatasetStats> {
    if ds.is_empty() {
        return arg("statistics of an empty dataset");
    }
    let max_norm = ds.examples.iter().map(SparseVec::norm).fold(0.0, f64::max);
    let class_counts = (ds.kind == LabelKind::Binary).then(|| {
        let mut counts = BTreeMap::new();
        for &y in &ds.labels {
            *counts.entry(y as i32).or_insert(0) += 1;
        }
        counts
    });
    Ok(DatasetStats { n: ds.len(), d: ds.dim, max_norm, class_counts })
}
