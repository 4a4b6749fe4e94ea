//! Pairwise coordinate-ascent (SMO) solver for the C-SVM classification dual
//! and the soft epsilon-tube regression dual on a working subset.
//!
//! Both duals are cast in the minimization form
//!
//! ```text
//! min_a  ½ aᵀQa + pᵀa   s.t.  Σ s_t a_t = 0,  0 ≤ a_t ≤ C
//! ```
//!
//! with `Q_tu = s_t s_u K(t, u)`. Classification has one variable per
//! example (`s = y`, `p = -1`). Regression has two, `a+` with `s = +1`,
//! `p = eps - y` followed by `a-` with `s = -1`, `p = eps + y`.
//! Working pairs are the maximal KKT-violating pair.

use std::sync::Arc;

use crate::dataset::SparseDataset;
use crate::error::{arg, Error, Result};
use crate::kernels::{compute_row, KernelCache, KernelSpec};
use crate::model::{SvmModel, Task};

/// Default KKT stopping tolerance.
pub const DEFAULT_KKT_TOL: f64 = 1e-3;

/// Kernel row cache budget for one solve.
pub const DEFAULT_CACHE_BYTES: usize = 256 << 20;

const TAU: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub model: SvmModel,
    /// Value of the dual (maximization form) at the returned point.
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rows of the kernel matrix over a working set of size `size()`.
pub(crate) trait KernelRows {
    fn size(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    fn row(&mut self, i: usize) -> Arc<[f64]>;
}

struct DatasetRows<'a> {
    ds: &'a SparseDataset,
    spec: KernelSpec,
    working: &'a [usize],
    cache: KernelCache,
    diag: Vec<f64>,
}

impl<'a> DatasetRows<'a> {
    fn new(ds: &'a SparseDataset, spec: KernelSpec, working: &'a [usize]) -> Self {
        let diag = working
            .iter()
            .map(|&i| spec.eval_unchecked(ds.x(i), ds.x(i)))
            .collect();
        let cache = KernelCache::with_budget(DEFAULT_CACHE_BYTES, working.len());
        Self { ds, spec, working, cache, diag }
    }
}

impl KernelRows for DatasetRows<'_> {
    fn size(&self) -> usize {
        self.working.len()
    }

    fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        let key = self.working[i];
        let (spec, ds, working) = (&self.spec, self.ds, self.working);
        self.cache.get_or_compute(key, || compute_row(spec, ds, key, working))
    }
}

/// Dense precomputed Gram matrix, row-major.
pub(crate) struct GramRows {
    m: usize,
    rows: Vec<Arc<[f64]>>,
}

impl GramRows {
    pub(crate) fn new(m: usize, gram: &[f64]) -> Self {
        assert_eq!(gram.len(), m * m);
        let rows = gram.chunks(m.max(1)).take(m).map(Arc::from).collect();
        Self { m, rows }
    }
}

impl KernelRows for GramRows {
    fn size(&self) -> usize {
        self.m
    }

    fn diag(&self, i: usize) -> f64 {
        self.rows[i][i]
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        self.rows[i].clone()
    }
}

/// Raw result of the minimization; `alpha` has one entry per variable.
pub(crate) struct CoreSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Core<'k, K: KernelRows> {
    kernel: &'k mut K,
    m: usize,
    /// 1 for classification, 2 for regression.
    blocks: usize,
    sign: Vec<f64>,
    p: Vec<f64>,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'k, K: KernelRows> Core<'k, K> {
    fn new(kernel: &'k mut K, sign: Vec<f64>, p: Vec<f64>, c: f64, alpha: Vec<f64>) -> Self {
        let m = kernel.size();
        let blocks = sign.len() / m;
        let mut core = Self { kernel, m, blocks, sign, p, c, alpha, grad: Vec::new() };
        core.init_gradient();
        core
    }

    #[inline]
    fn base(&self, t: usize) -> usize {
        t % self.m
    }

    fn init_gradient(&mut self) {
        self.grad = self.p.clone();
        // Fold the initial alphas of each example into one signed coefficient.
        let mut coef = vec![0.0; self.m];
        for (t, &a) in self.alpha.iter().enumerate() {
            if a != 0.0 {
                coef[t % self.m] += self.sign[t] * a;
            }
        }
        for (k, &ck) in coef.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let row = self.kernel.row(k);
            for t in 0..self.grad.len() {
                self.grad[t] += self.sign[t] * ck * row[t % self.m];
            }
        }
    }

    #[inline]
    fn in_up(&self, t: usize) -> bool {
        if self.sign[t] > 0.0 {
            self.alpha[t] < self.c
        } else {
            self.alpha[t] > 0.0
        }
    }

    #[inline]
    fn in_low(&self, t: usize) -> bool {
        if self.sign[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.c
        }
    }

    /// Maximal violating pair and the current gap `m(a) - M(a)`.
    fn select(&self) -> (Option<usize>, Option<usize>, f64) {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (None, None);
        for t in 0..self.alpha.len() {
            let v = -self.sign[t] * self.grad[t];
            if self.in_up(t) && v > gmax {
                gmax = v;
                i = Some(t);
            }
            if self.in_low(t) && v < gmin {
                gmin = v;
                j = Some(t);
            }
        }
        (i, j, gmax - gmin)
    }

    fn step(&mut self, i: usize, j: usize) {
        let (bi, bj) = (self.base(i), self.base(j));
        let row_i = self.kernel.row(bi);
        let row_j = self.kernel.row(bj);
        let (si, sj) = (self.sign[i], self.sign[j]);
        let qii = self.kernel.diag(bi);
        let qjj = self.kernel.diag(bj);
        let qij = si * sj * row_i[bj];
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if si != sj {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        let (dai, daj) = (ai - old_i, aj - old_j);
        debug_assert!({
            let change = gi * dai + gj * daj
                + 0.5 * (qii * dai * dai + qjj * daj * daj + 2.0 * qij * dai * daj);
            // dai, daj carry rounding from subtracting alphas of size up to C.
            let noise = 8.0 * f64::EPSILON * (gi.abs() * old_i.max(ai) + gj.abs() * old_j.max(aj));
            let scale = (gi * dai).abs() + (gj * daj).abs() + qii * dai * dai + qjj * daj * daj;
            change <= 1e-9 * scale + noise + 1e-300
        }, "SMO step increased the objective");

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let ci = si * dai;
        let cj = sj * daj;
        let m = self.m;
        for blk in 0..self.blocks {
            let off = blk * m;
            let g = &mut self.grad[off..off + m];
            let s = &self.sign[off..off + m];
            for k in 0..m {
                g[k] += s[k] * (ci * row_i[k] + cj * row_j[k]);
            }
        }
    }

    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut sum_free = 0.0;
        let mut n_free = 0usize;
        for t in 0..self.alpha.len() {
            let yg = self.sign[t] * self.grad[t];
            let a = self.alpha[t];
            if a >= self.c {
                if self.sign[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if a <= 0.0 {
                if self.sign[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if ub.is_finite() {
            ub
        } else if lb.is_finite() {
            lb
        } else {
            0.0
        }
    }

    fn objective(&self) -> f64 {
        0.5 * self
            .alpha
            .iter()
            .zip(&self.grad)
            .zip(&self.p)
            .map(|((a, g), p)| a * (g + p))
            .sum::<f64>()
    }

    fn run(mut self, tol: f64, max_iter: usize) -> CoreSolution {
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let (i, j, gap) = self.select();
            let (Some(i), Some(j)) = (i, j) else {
                converged = true;
                break;
            };
            if gap <= tol {
                converged = true;
                break;
            }
            self.step(i, j);
            iterations += 1;
        }
        if !converged {
            converged = self.select().2 <= tol;
        }
        CoreSolution {
            rho: self.rho(),
            objective: self.objective(),
            iterations,
            converged,
            alpha: self.alpha,
        }
    }
}

pub(crate) fn solve_core<K: KernelRows>(
    kernel: &mut K,
    sign: Vec<f64>,
    p: Vec<f64>,
    c: f64,
    alpha0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> CoreSolution {
    Core::new(kernel, sign, p, c, alpha0).run(tol, max_iter)
}

fn check_common(ds: &SparseDataset, working: &[usize], kernel: &KernelSpec, c: f64, tol: f64) -> Result<()> {
    if working.is_empty() {
        return arg("working set is empty");
    }
    if !(c.is_finite() && c > 0.0) {
        return arg(format!("C must be positive, got {c}"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return arg(format!("KKT tolerance must be positive, got {tol}"));
    }
    kernel.validate()?;
    let mut seen = working.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return arg("working set contains duplicate indices");
    }
    if let Some(&last) = seen.last() {
        if last >= ds.len() {
            return arg(format!("working index {last} out of range for {} examples", ds.len()));
        }
    }
    Ok(())
}

fn iteration_cap(m: usize) -> usize {
    10_000usize.saturating_mul(m)
}

/// Seeds the per-variable alphas from a previous model's coefficients on the
/// indices it shares with `working`. Returns all zeros when the carried-over
/// coefficients break the equality constraint.
fn warm_alphas(working: &[usize], warm: Option<&SvmModel>, sign: &[f64], c: f64) -> Vec<f64> {
    let blocks = sign.len() / working.len();
    let m = working.len();
    let mut alpha = vec![0.0; blocks * m];
    let Some(model) = warm else { return alpha };
    let coef: std::collections::HashMap<usize, f64> =
        model.sv_indices.iter().copied().zip(model.dual_coef.iter().copied()).collect();
    let mut net = 0.0;
    for (k, idx) in working.iter().enumerate() {
        let Some(&b) = coef.get(idx) else { continue };
        let b = b.clamp(-c, c);
        if blocks == 1 {
            let a = (b * sign[k]).max(0.0);
            net += a * sign[k];
            alpha[k] = a;
            continue;
        }
        net += b;
        if b > 0.0 {
            alpha[k] = b;
        } else {
            alpha[m + k] = -b;
        }
    }
    if net.abs() > 1e-8 * c * m as f64 {
        alpha.iter_mut().for_each(|a| *a = 0.0);
    }
    alpha
}

fn build_model(
    ds: &SparseDataset,
    working: &[usize],
    task: Task,
    kernel: KernelSpec,
    c: f64,
    sol: &CoreSolution,
    sign: &[f64],
) -> SvmModel {
    let m = working.len();
    let mut model = SvmModel::constant(task, kernel, c, -sol.rho);
    for (k, &idx) in working.iter().enumerate() {
        let mut coef = sign[k] * sol.alpha[k];
        if sol.alpha.len() > m {
            coef += sign[m + k] * sol.alpha[m + k];
        }
        if coef != 0.0 {
            model.sv_indices.push(idx);
            model.dual_coef.push(coef);
            model.sv_vectors.push(ds.x(idx).clone());
        }
    }
    model
}

/// Solves the C-SVM classification dual restricted to `working`.
///
/// A working set holding only one class yields [`Error::Degenerate`].
pub fn solve_csvc(
    ds: &SparseDataset,
    working: &[usize],
    kernel: &KernelSpec,
    c: f64,
    warm_start: Option<&SvmModel>,
    kkt_tol: f64,
) -> Result<SolveOutcome> {
    check_common(ds, working, kernel, c, kkt_tol)?;
    let sign: Vec<f64> = working.iter().map(|&i| ds.y(i)).collect();
    if let Some(bad) = sign.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return arg(format!("classification label {bad} is not +1/-1"));
    }
    let has_pos = sign.iter().any(|&y| y > 0.0);
    let has_neg = sign.iter().any(|&y| y < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::Degenerate(format!(
            "all {} working examples share one label",
            working.len()
        )));
    }
    let p = vec![-1.0; working.len()];
    let alpha0 = warm_alphas(working, warm_start, &sign, c);
    let mut rows = DatasetRows::new(ds, *kernel, working);
    let sol = solve_core(&mut rows, sign.clone(), p, c, alpha0, kkt_tol, iteration_cap(working.len()));
    let model = build_model(ds, working, Task::Classify, *kernel, c, &sol, &sign);
    Ok(SolveOutcome {
        model,
        dual_objective: -sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Solves the soft epsilon-tube regression dual restricted to `working`.
pub fn solve_svr(
    ds: &SparseDataset,
    working: &[usize],
    kernel: &KernelSpec,
    c: f64,
    epsilon_tube: f64,
    warm_start: Option<&SvmModel>,
    kkt_tol: f64,
) -> Result<SolveOutcome> {
    check_common(ds, working, kernel, c, kkt_tol)?;
    if !(epsilon_tube.is_finite() && epsilon_tube >= 0.0) {
        return arg(format!("tube half-width must be nonnegative, got {epsilon_tube}"));
    }
    let m = working.len();
    let mut sign = vec![1.0; m];
    sign.extend(std::iter::repeat_n(-1.0, m));
    let mut p: Vec<f64> = working.iter().map(|&i| epsilon_tube - ds.y(i)).collect();
    p.extend(working.iter().map(|&i| epsilon_tube + ds.y(i)));
    let alpha0 = warm_alphas(working, warm_start, &sign, c);
    let mut rows = DatasetRows::new(ds, *kernel, working);
    let sol = solve_core(&mut rows, sign.clone(), p, c, alpha0, kkt_tol, iteration_cap(m));
    let task = Task::Regress { epsilon: epsilon_tube };
    let model = build_model(ds, working, task, *kernel, c, &sol, &sign);
    Ok(SolveOutcome {
        model,
        dual_objective: -sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Solves `task` on `working` with the solver matching the task.
pub fn solve_task(
    ds: &SparseDataset,
    working: &[usize],
    task: Task,
    kernel: &KernelSpec,
    c: f64,
    warm_start: Option<&SvmModel>,
    kkt_tol: f64,
) -> Result<SolveOutcome> {
    match task {
        Task::Classify => solve_csvc(ds, working, kernel, c, warm_start, kkt_tol),
        Task::Regress { epsilon } => solve_svr(ds, working, kernel, c, epsilon, warm_start, kkt_tol),
    }
}

/// Classification dual on a precomputed Gram matrix (row-major `m × m`).
#[derive(Clone, Debug)]
pub struct GramSolution {
    /// `alpha_i * y_i` per point.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub dual_objective: f64,
    /// `||w||²` evaluated as `coefᵀ K coef`.
    pub w_sq_norm: f64,
    pub converged: bool,
}

pub fn solve_csvc_gram(gram: &[f64], labels: &[f64], c: f64, kkt_tol: f64) -> Result<GramSolution> {
    let m = labels.len();
    if m == 0 || gram.len() != m * m {
        return arg("Gram matrix must be m x m for m labels, m > 0");
    }
    if !(c.is_finite() && c > 0.0) {
        return arg(format!("C must be positive, got {c}"));
    }
    if !(labels.iter().any(|&y| y > 0.0) && labels.iter().any(|&y| y < 0.0)) {
        return Err(Error::Degenerate("labels share one class".into()));
    }
    let mut rows = GramRows::new(m, gram);
    let sol = solve_core(
        &mut rows,
        labels.to_vec(),
        vec![-1.0; m],
        c,
        vec![0.0; m],
        kkt_tol,
        iteration_cap(m),
    );
    let dual_coef: Vec<f64> = sol.alpha.iter().zip(labels).map(|(a, y)| a * y).collect();
    let mut w_sq_norm = 0.0;
    for i in 0..m {
        if dual_coef[i] == 0.0 {
            continue;
        }
        let row = &gram[i * m..(i + 1) * m];
        w_sq_norm += dual_coef[i] * row.iter().zip(&dual_coef).map(|(k, c)| k * c).sum::<f64>();
    }
    Ok(GramSolution {
        dual_coef,
        bias: -sol.rho,
        dual_objective: -sol.objective,
        w_sq_norm,
        converged: sol.converged,
    })
}
