//! Randomized outer loops around the working-set solver.
//!
//! [`train_violator_resampling`] keeps the current support vectors and pulls
//! a random batch of KKT violators into each new working set.
//! [`train_weighted_resampling`] draws independent weighted samples and
//! doubles the weight of violators whenever they carry little total weight.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::SamplePlan;
use crate::dataset::{uniform_sample, weighted_sample_from, SparseDataset};
use crate::error::{arg, Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{violates, SvmModel, Task};
use crate::smo::{solve_task, SolveOutcome, DEFAULT_KKT_TOL};

pub const DEFAULT_MAX_OUTER_ITERS: usize = 200;
/// Redraws of a single-class initial sample before giving up.
pub const DEGENERATE_RETRIES: usize = 5;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub plan: SamplePlan,
    pub task: Task,
    pub c: f64,
    pub kernel: KernelSpec,
    pub kkt_tol: f64,
    pub viol_tol: f64,
    pub max_outer_iters: usize,
    pub seed: u64,
    /// Number of chunks the violator scan is split into; 0 or 1 scans inline.
    pub scan_parallelism: usize,
}

impl TrainConfig {
    pub fn new(plan: SamplePlan, task: Task, c: f64, kernel: KernelSpec) -> Self {
        Self {
            plan,
            task,
            c,
            kernel,
            kkt_tol: DEFAULT_KKT_TOL,
            viol_tol: DEFAULT_KKT_TOL,
            max_outer_iters: DEFAULT_MAX_OUTER_ITERS,
            seed: 0,
            scan_parallelism: rayon::current_num_threads(),
        }
    }

    fn validate(&self, ds: &SparseDataset) -> Result<()> {
        if ds.is_empty() {
            return arg("training set is empty");
        }
        if self.max_outer_iters == 0 {
            return arg("maxOuterIters must be at least 1");
        }
        if !(self.viol_tol.is_finite() && self.viol_tol >= 0.0) {
            return arg(format!("violator tolerance must be nonnegative, got {}", self.viol_tol));
        }
        if self.plan.k == 0 || self.plan.r < self.plan.k {
            return arg("plan must satisfy 1 <= k <= r");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub working: usize,
    pub sv: usize,
    pub violators: usize,
    /// Dual objective of this iteration's working-set solve.
    pub objective: f64,
    pub millis: f64,
    /// Weighted resampling only: this round doubled the violator weights.
    pub weights_doubled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    NoViolators,
    SvBudgetExceeded,
    IterCap,
    Degenerate,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::NoViolators => "noViolators",
            Termination::SvBudgetExceeded => "svBudgetExceeded",
            Termination::IterCap => "iterCap",
            Termination::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// `None` only when no working set could be solved.
    pub final_model: Option<SvmModel>,
    /// Working set of the solve that produced `final_model`.
    pub final_working: Vec<usize>,
    /// Sample size actually drawn per round.
    pub sample_size: usize,
    /// The weighted sample size 6k² had to be cut down to n.
    pub sample_clamped: bool,
}

impl TrainReport {
    pub fn doublings(&self) -> usize {
        self.iterations.iter().filter(|r| r.weights_doubled).count()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.final_model.as_ref().and(self.iterations.last().map(|r| r.objective))
    }

    /// One row per outer iteration under the header
    /// `iter,working,sv,violators,objective,ms`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,working,sv,violators,objective,ms\n");
        for (i, r) in self.iterations.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.12e},{:.3}",
                i + 1,
                r.working,
                r.sv,
                r.violators,
                r.objective,
                r.millis
            );
        }
        s
    }
}

/// Indices `i` not in `exclude` for which `violates(model, ds, i, tol)`,
/// ascending. Splitting the scan into chunks does not change the result.
pub fn scan_violators(
    model: &SvmModel,
    ds: &SparseDataset,
    exclude: &[usize],
    tol: f64,
    parallelism: usize,
) -> Vec<usize> {
    let n = ds.len();
    let mut skip = vec![false; n];
    for &i in exclude {
        if i < n {
            skip[i] = true;
        }
    }
    let check = |i: usize| !skip[i] && violates(model, ds, i, tol);
    if parallelism <= 1 || n < 2 {
        return (0..n).filter(|&i| check(i)).collect();
    }
    let chunk = n.div_ceil(parallelism);
    let parts: Vec<Vec<usize>> = (0..parallelism)
        .into_par_iter()
        .map(|p| {
            let lo = (p * chunk).min(n);
            let hi = ((p + 1) * chunk).min(n);
            (lo..hi).filter(|&i| check(i)).collect()
        })
        .collect();
    parts.concat()
}

/// Every index of `ds` whose KKT condition fails at `tol`, taking each
/// point's own coefficient in `model` into account: zero-coefficient points
/// use [`violates`], free ones must sit on the margin (or tube edge) and
/// bounded ones on the wrong side of it.
pub fn kkt_violators(model: &SvmModel, ds: &SparseDataset, tol: f64) -> Vec<usize> {
    let mut coef = vec![0.0; ds.len()];
    for (&i, &b) in model.sv_indices.iter().zip(&model.dual_coef) {
        if i < coef.len() {
            coef[i] = b;
        }
    }
    let at_bound = |a: f64| a >= model.c * (1.0 - 1e-12);
    (0..ds.len())
        .filter(|&i| {
            let b = coef[i];
            if b == 0.0 {
                return violates(model, ds, i, tol);
            }
            let f = model.decision(ds.x(i));
            let y = ds.y(i);
            match model.task {
                Task::Classify => {
                    let m = y * f;
                    if at_bound(b * y) {
                        m > 1.0 + tol
                    } else {
                        (m - 1.0).abs() > tol
                    }
                }
                Task::Regress { epsilon } => {
                    // Positive coefficient: the point lies above the tube.
                    let r = (y - f) * b.signum();
                    if at_bound(b.abs()) {
                        r < epsilon - tol
                    } else {
                        (r - epsilon).abs() > tol
                    }
                }
            }
        })
        .collect()
}

fn solve_timed(
    ds: &SparseDataset,
    working: &[usize],
    cfg: &TrainConfig,
    warm: Option<&SvmModel>,
) -> Result<(SolveOutcome, f64)> {
    let t0 = Instant::now();
    let out = solve_task(ds, working, cfg.task, &cfg.kernel, cfg.c, warm, cfg.kkt_tol)?;
    Ok((out, t0.elapsed().as_secs_f64() * 1e3))
}

fn check_task(ds: &SparseDataset, task: Task) -> Result<()> {
    if task == Task::Classify && ds.labels().iter().any(|&y| y != 1.0 && y != -1.0) {
        return arg("classification needs +1/-1 labels");
    }
    Ok(())
}

fn degenerate_report(sample_size: usize, sample_clamped: bool) -> TrainReport {
    TrainReport {
        iterations: Vec::new(),
        termination: Termination::Degenerate,
        final_model: None,
        final_working: Vec::new(),
        sample_size,
        sample_clamped,
    }
}

/// Solves on all of `ds` at once; the baseline the randomized loops are
/// measured against.
pub fn train_full(ds: &SparseDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate(ds)?;
    check_task(ds, cfg.task)?;
    let working: Vec<usize> = (0..ds.len()).collect();
    let (out, millis) = match solve_timed(ds, &working, cfg, None) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => return Ok(degenerate_report(working.len(), false)),
        Err(e) => return Err(e),
    };
    Ok(TrainReport {
        iterations: vec![IterationRecord {
            working: working.len(),
            sv: out.model.n_sv(),
            violators: 0,
            objective: out.dual_objective,
            millis,
            weights_doubled: false,
        }],
        termination: Termination::NoViolators,
        final_model: Some(out.model),
        final_working: working,
        sample_size: ds.len(),
        sample_clamped: false,
    })
}

/// Violator resampling.
///
/// Draws a uniform working set of size r and solves it. While violators
/// remain outside the working set and fewer than k support vectors are in
/// use, the next working set is the current support vectors plus a random
/// batch of `r - |SV|` violators (all of them if fewer), warm-started from
/// the current coefficients.
pub fn train_violator_resampling(ds: &SparseDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate(ds)?;
    check_task(ds, cfg.task)?;
    let n = ds.len();
    let r = cfg.plan.r.min(n);
    let k = cfg.plan.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::new();

    let mut first = None;
    for _ in 0..=DEGENERATE_RETRIES {
        let working = uniform_sample(n, r, &mut rng)?;
        match solve_timed(ds, &working, cfg, None) {
            Ok(v) => {
                first = Some((working, v));
                break;
            }
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some((mut working, (out, mut millis))) = first else {
        return Ok(degenerate_report(r, false));
    };
    let mut model = out.model;
    let mut objective = out.dual_objective;

    let mut best: Option<(usize, SvmModel, Vec<usize>)> = None;
    loop {
        let t0 = Instant::now();
        let viol = scan_violators(&model, ds, &working, cfg.viol_tol, cfg.scan_parallelism);
        millis += t0.elapsed().as_secs_f64() * 1e3;
        let sv = model.n_sv();
        records.push(IterationRecord {
            working: working.len(),
            sv,
            violators: viol.len(),
            objective,
            millis,
            weights_doubled: false,
        });
        let termination = if viol.is_empty() {
            Some(Termination::NoViolators)
        } else if sv >= k {
            Some(Termination::SvBudgetExceeded)
        } else if records.len() >= cfg.max_outer_iters {
            Some(Termination::IterCap)
        } else {
            None
        };
        if let Some(t) = termination {
            let (final_model, final_working) = match (t, best) {
                (Termination::IterCap, Some((v, m, w))) if v < viol.len() => (m, w),
                _ => (model, working),
            };
            return Ok(TrainReport {
                iterations: records,
                termination: t,
                final_model: Some(final_model),
                final_working,
                sample_size: r,
                sample_clamped: false,
            });
        }
        if best.as_ref().is_none_or(|(v, _, _)| viol.len() <= *v) {
            best = Some((viol.len(), model.clone(), working.clone()));
        }

        let want = r.saturating_sub(sv).max(1);
        let batch: Vec<usize> = if viol.len() <= want {
            viol
        } else {
            uniform_sample(viol.len(), want, &mut rng)?.into_iter().map(|j| viol[j]).collect()
        };
        let mut next = model.sv_indices.clone();
        next.extend(batch);
        next.sort_unstable();
        next.dedup();
        let (out, ms) = match solve_timed(ds, &next, cfg, Some(&model)) {
            Ok(v) => v,
            Err(Error::Degenerate(_)) => {
                return Ok(TrainReport {
                    iterations: records,
                    termination: Termination::Degenerate,
                    final_model: Some(model),
                    final_working: working,
                    sample_size: r,
                    sample_clamped: false,
                });
            }
            Err(e) => return Err(e),
        };
        working = next;
        model = out.model;
        objective = out.dual_objective;
        millis = ms;
    }
}

/// Weighted resampling with Δ = plan.k.
///
/// Every round draws `min(6Δ², n)` points by weight and solves them from
/// scratch. Violators are counted outside the sample; if there are none, the
/// whole set is rescanned (support vectors excepted) so that termination
/// reflects the global count. When the violators weigh at most `w(D)/(3Δ)`
/// their weights double.
pub fn train_weighted_resampling(ds: &SparseDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate(ds)?;
    check_task(ds, cfg.task)?;
    let n = ds.len();
    let delta = cfg.plan.k as f64;
    let want = 6.0 * delta * delta;
    let sample_clamped = want > n as f64;
    let r = if sample_clamped { n } else { want as usize };
    let mut weights = vec![1.0f64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut last: Option<(SvmModel, Vec<usize>)> = None;
    let mut degenerate_run = 0;

    while records.len() < cfg.max_outer_iters {
        let t0 = Instant::now();
        let sample = weighted_sample_from(&weights, r, &mut rng)?;
        let out = match solve_task(ds, &sample, cfg.task, &cfg.kernel, cfg.c, None, cfg.kkt_tol) {
            Ok(out) => out,
            Err(Error::Degenerate(_)) => {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RETRIES {
                    break;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        degenerate_run = 0;
        let mut viol = scan_violators(&out.model, ds, &sample, cfg.viol_tol, cfg.scan_parallelism);
        if viol.is_empty() {
            viol = scan_violators(&out.model, ds, &out.model.sv_indices, cfg.viol_tol, cfg.scan_parallelism);
        }
        let w_total: f64 = weights.iter().sum();
        let w_viol: f64 = viol.iter().map(|&i| weights[i]).sum();
        let doubled = !viol.is_empty() && w_viol <= w_total / (3.0 * delta);
        if doubled {
            for &i in &viol {
                weights[i] *= 2.0;
            }
        }
        records.push(IterationRecord {
            working: sample.len(),
            sv: out.model.n_sv(),
            violators: viol.len(),
            objective: out.dual_objective,
            millis: t0.elapsed().as_secs_f64() * 1e3,
            weights_doubled: doubled,
        });
        let done = viol.is_empty();
        last = Some((out.model, sample));
        if done {
            break;
        }
    }

    let Some((model, working)) = last else {
        return Ok(degenerate_report(r, sample_clamped));
    };
    let termination = match records.last() {
        Some(rec) if rec.violators == 0 => Termination::NoViolators,
        _ if degenerate_run > DEGENERATE_RETRIES => Termination::Degenerate,
        _ => Termination::IterCap,
    };
    Ok(TrainReport {
        iterations: records,
        termination,
        final_model: Some(model),
        final_working: working,
        sample_size: r,
        sample_clamped,
    })
}
