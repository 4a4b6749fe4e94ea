//! Kernel functions and a least-recently-used cache of kernel rows.

use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;

use crate::dataset::{SparseDataset, SparseVec};
use crate::error::{arg, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `exp(-||x - z||² / (2 sigma²))`
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return arg(format!("gaussian sigma must be positive, got {sigma}"));
        }
        Ok(Self::Gaussian { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Linear => Ok(()),
            Self::Gaussian { sigma } => Self::gaussian(sigma).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    /// Kernel value from the two squared norms and the dot product. Every
    /// kernel evaluation in the crate goes through here so that cached and
    /// recomputed values agree bit for bit.
    #[inline]
    pub(crate) fn eval_parts(&self, xx: f64, zz: f64, xz: f64) -> f64 {
        match *self {
            Self::Linear => xz,
            Self::Gaussian { sigma } => {
                let d2 = (xx + zz - 2.0 * xz).max(0.0);
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &SparseVec, z: &SparseVec) -> f64 {
        self.eval_parts(x.sq_norm(), z.sq_norm(), x.dot(z))
    }
}

/// Evaluates the kernel on two sparse vectors.
pub fn k_eval(spec: &KernelSpec, x: &SparseVec, z: &SparseVec) -> Result<f64> {
    let v = spec.eval_unchecked(x, z);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{} kernel produced {v}", spec.name())))
    }
}

/// Rows of kernel values against a fixed working list, keyed by example index.
///
/// Rows are invalidated wholesale whenever a different working list is used.
pub struct KernelCache {
    working: Vec<usize>,
    rows: LruCache<usize, Arc<[f64]>>,
    hits: u64,
    misses: u64,
}

impl KernelCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        Self { working: Vec::new(), rows: LruCache::new(cap), hits: 0, misses: 0 }
    }

    /// Capacity for a memory budget in bytes given the row length, at least 2
    /// rows so a pair update never thrashes.
    pub fn with_budget(budget_bytes: usize, row_len: usize) -> Self {
        let row_bytes = row_len.max(1) * std::mem::size_of::<f64>();
        Self::new((budget_bytes / row_bytes).max(2))
    }

    pub fn capacity(&self) -> usize {
        self.rows.cap().get()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Lookup without the index validation and working-list check of
    /// [`k_row`]; the caller guarantees the cache is bound to one working list.
    pub(crate) fn get_or_compute(
        &mut self,
        key: usize,
        compute: impl FnOnce() -> Arc<[f64]>,
    ) -> Arc<[f64]> {
        if let Some(row) = self.rows.get(&key) {
            self.hits += 1;
            return row.clone();
        }
        self.misses += 1;
        let row = compute();
        self.rows.put(key, row.clone());
        row
    }

    fn bind(&mut self, working: &[usize]) {
        if self.working != working {
            self.rows.clear();
            self.working.clear();
            self.working.extend_from_slice(working);
        }
    }
}

/// `row[j] = k(x_i, x_{working[j]})`, served from the cache when present.
pub fn k_row(
    spec: &KernelSpec,
    ds: &SparseDataset,
    i: usize,
    working: &[usize],
    cache: &mut KernelCache,
) -> Result<Arc<[f64]>> {
    let n = ds.len();
    if i >= n {
        return arg(format!("row index {i} out of range for {n} examples"));
    }
    if let Some(&bad) = working.iter().find(|&&j| j >= n) {
        return arg(format!("working index {bad} out of range for {n} examples"));
    }
    cache.bind(working);
    if let Some(row) = cache.rows.get(&i) {
        cache.hits += 1;
        return Ok(row.clone());
    }
    cache.misses += 1;
    let row = compute_row(spec, ds, i, working);
    cache.rows.put(i, row.clone());
    Ok(row)
}

pub(crate) fn compute_row(
    spec: &KernelSpec,
    ds: &SparseDataset,
    i: usize,
    working: &[usize],
) -> Arc<[f64]> {
    let xi = ds.x(i);
    working
        .iter()
        .map(|&j| spec.eval_unchecked(xi, ds.x(j)))
        .collect()
}
