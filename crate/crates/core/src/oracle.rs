//! Dense reference solver for small SVM duals.
//!
//! Shares no update logic with the SMO solver: the dual is materialized as a
//! dense quadratic program and maximized by accelerated projected-gradient
//! ascent, projecting exactly onto the box intersected with the equality
//! hyperplane.

use crate::dataset::SparseDataset;
use crate::error::{arg, Error, Result};
use crate::kernels::{k_eval, KernelSpec};
use crate::model::Task;

/// Largest working set `build_dual` accepts.
pub const DENSE_LIMIT: usize = 500;

const MAX_ITERS: usize = 1_000_000;

/// `maximize linearᵀa - ½ aᵀQa  s.t.  box_lo ≤ a ≤ box_hi,  eq_coefᵀa = eq_rhs`
#[derive(Clone, Debug)]
pub struct DenseQP {
    /// Row-major `n × n`.
    pub q: Vec<f64>,
    pub linear: Vec<f64>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub eq_coef: Vec<f64>,
    pub eq_rhs: f64,
}

impl DenseQP {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.dim() + j]
    }

    fn q_times(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| self.q[i * n..(i + 1) * n].iter().zip(a).map(|(q, x)| q * x).sum())
            .collect()
    }

    pub fn objective(&self, a: &[f64]) -> f64 {
        let qa = self.q_times(a);
        a.iter()
            .zip(&self.linear)
            .zip(&qa)
            .map(|((x, l), q)| l * x - 0.5 * x * q)
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.q.len() != n * n
            || self.box_lo.len() != n
            || self.box_hi.len() != n
            || self.eq_coef.len() != n
        {
            return arg("dense QP component sizes disagree");
        }
        for i in 0..n {
            if self.box_lo[i] > self.box_hi[i] {
                return arg(format!("box bound {i} is inverted"));
            }
            for j in 0..i {
                let (a, b) = (self.q_at(i, j), self.q_at(j, i));
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return arg(format!("Q is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection onto `{box} ∩ {eq_coefᵀa = eq_rhs}`, by bisection
    /// on the hyperplane multiplier.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let clip = |lam: f64| -> Vec<f64> {
            v.iter()
                .enumerate()
                .map(|(i, &x)| (x - lam * self.eq_coef[i]).clamp(self.box_lo[i], self.box_hi[i]))
                .collect()
        };
        let resid = |a: &[f64]| -> f64 {
            a.iter().zip(&self.eq_coef).map(|(x, c)| x * c).sum::<f64>() - self.eq_rhs
        };
        // resid(clip(lam)) is nonincreasing in lam.
        let mut lo = -1.0;
        let mut hi = 1.0;
        let mut expand = 0;
        while resid(&clip(lo)) < 0.0 {
            lo *= 2.0;
            expand += 1;
            if expand > 2000 {
                return Err(Error::Numeric("equality constraint is infeasible".into()));
            }
        }
        while resid(&clip(hi)) > 0.0 {
            hi *= 2.0;
            expand += 1;
            if expand > 2000 {
                return Err(Error::Numeric("equality constraint is infeasible".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if resid(&clip(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a_lo, a_hi) = (clip(lo), clip(hi));
        let (r_lo, r_hi) = (resid(&a_lo), resid(&a_hi));
        // Residual is linear between the bracketing points once they share an
        // active set; interpolate to land on the hyperplane.
        if r_lo - r_hi > 0.0 {
            let t = r_lo / (r_lo - r_hi);
            Ok(clip(lo + t * (hi - lo)))
        } else {
            Ok(a_lo)
        }
    }
}

/// Largest eigenvalue of Q estimated by power iteration, capped by the
/// Gershgorin bound.
fn lipschitz(qp: &DenseQP) -> f64 {
    let n = qp.dim();
    let gersh = (0..n)
        .map(|i| qp.q[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if gersh == 0.0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut lam = 0.0;
    for _ in 0..300 {
        let w = qp.q_times(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lam = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    (1.05 * lam).min(gersh).max(1e-12)
}

/// Builds the dense dual of the classification or regression problem on
/// `working`. Regression variables are ordered `a+` then `a-`.
pub fn build_dual(
    ds: &SparseDataset,
    working: &[usize],
    kernel: &KernelSpec,
    c: f64,
    task: Task,
) -> Result<DenseQP> {
    let m = working.len();
    if m > DENSE_LIMIT {
        return arg(format!("dense dual limited to {DENSE_LIMIT} points, got {m}"));
    }
    if c.is_nan() || c <= 0.0 {
        return arg("C must be positive");
    }
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            gram[a * m + b] = k_eval(kernel, ds.x(working[a]), ds.x(working[b]))?;
        }
    }
    let y: Vec<f64> = working.iter().map(|&i| ds.y(i)).collect();
    match task {
        Task::Classify => {
            let mut q = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    q[a * m + b] = y[a] * y[b] * gram[a * m + b];
                }
            }
            Ok(DenseQP {
                q,
                linear: vec![1.0; m],
                box_lo: vec![0.0; m],
                box_hi: vec![c; m],
                eq_coef: y,
                eq_rhs: 0.0,
            })
        }
        Task::Regress { epsilon } => {
            let n = 2 * m;
            let mut q = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    let sa = if a < m { 1.0 } else { -1.0 };
                    let sb = if b < m { 1.0 } else { -1.0 };
                    q[a * n + b] = sa * sb * gram[(a % m) * m + (b % m)];
                }
            }
            let mut linear: Vec<f64> = y.iter().map(|v| v - epsilon).collect();
            linear.extend(y.iter().map(|v| -v - epsilon));
            let mut eq_coef = vec![1.0; m];
            eq_coef.extend(std::iter::repeat_n(-1.0, m));
            Ok(DenseQP {
                q,
                linear,
                box_lo: vec![0.0; n],
                box_hi: vec![c; n],
                eq_coef,
                eq_rhs: 0.0,
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective of the accepted iterate after every iteration.
    pub trace: Vec<f64>,
    /// Largest equality or box violation over all accepted iterates.
    pub max_infeasibility: f64,
}

/// Maximizes the QP until the projected-gradient norm falls to `tol`.
pub fn solve_dense(qp: &DenseQP, tol: f64) -> Result<(Vec<f64>, f64)> {
    let s = solve_dense_traced(qp, tol)?;
    Ok((s.alpha, s.objective))
}

pub fn solve_dense_traced(qp: &DenseQP, tol: f64) -> Result<DenseSolution> {
    qp.validate()?;
    let n = qp.dim();
    let lip = lipschitz(qp);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let ascent = |a: &[f64]| -> Vec<f64> {
        let qa = qp.q_times(a);
        qp.linear.iter().zip(&qa).map(|(l, q)| l - q).collect()
    };
    let infeasibility = |a: &[f64]| -> f64 {
        let eq = (a.iter().zip(&qp.eq_coef).map(|(x, c)| x * c).sum::<f64>() - qp.eq_rhs).abs();
        let bx = (0..n)
            .map(|i| (qp.box_lo[i] - a[i]).max(a[i] - qp.box_hi[i]).max(0.0))
            .fold(0.0, f64::max);
        eq.max(bx)
    };
    let pg_norm = |a: &[f64]| -> Result<f64> {
        let g = ascent(a);
        let moved: Vec<f64> = a.iter().zip(&g).map(|(x, d)| x + step * d).collect();
        let p = qp.project(&moved)?;
        Ok(p.iter().zip(a).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / step)
    };

    let mut x = qp.project(&vec![0.0; n])?;
    let mut fx = qp.objective(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut trace = vec![fx];
    let mut max_infeasibility = infeasibility(&x);
    let mut restarted = false;

    for it in 1..=MAX_ITERS {
        let g = ascent(&y);
        let moved: Vec<f64> = y.iter().zip(&g).map(|(a, d)| a + step * d).collect();
        let z = qp.project(&moved)?;
        // Objective change from x to z evaluated from the step itself, which is
        // far less noisy than differencing two large objective values.
        let d: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
        let gx = ascent(&x);
        let qd = qp.q_times(&d);
        let gain: f64 = (0..n).map(|i| d[i] * (gx[i] - 0.5 * qd[i])).sum();
        let improved = gain > 0.0 || (gain == 0.0 && d.iter().all(|&v| v == 0.0));
        let fz = qp.objective(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = std::mem::take(&mut x);
        if improved {
            x = z.clone();
            fx = fz;
            y = (0..n)
                .map(|i| x[i] + ((t - 1.0) / t_next) * (x[i] - x_prev[i]))
                .collect();
            t = t_next;
        } else if restarted {
            // A plain projected-gradient step from x no longer improves the
            // objective in floating point: x is stationary to working precision.
            x = x_prev;
            trace.push(fx);
            let scale = qp.linear.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if pg_norm(&x)? > 1e-6 * scale {
                return Err(Error::Numeric("dense oracle stalled away from a stationary point".into()));
            }
            return Ok(DenseSolution { alpha: x, objective: fx, iterations: it, trace, max_infeasibility });
        } else {
            // Monotone safeguard with momentum restart.
            x = x_prev;
            y = x.clone();
            t = 1.0;
        }
        restarted = !improved;
        trace.push(fx);
        max_infeasibility = max_infeasibility.max(infeasibility(&x));
        if it % 10 == 0 && pg_norm(&x)? <= tol {
            return Ok(DenseSolution { alpha: x, objective: fx, iterations: it, trace, max_infeasibility });
        }
    }
    Err(Error::Numeric(format!("dense oracle did not converge in {MAX_ITERS} iterations")))
}
