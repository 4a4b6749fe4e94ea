//! Monte-Carlo checks of random-projection distortion.
//!
//! Projections use `u' = Rᵀu/√k` with `R` a `d × k` matrix of independent
//! N(0,1) entries. Every trial draws a fresh `R` from its own stream of the
//! seeded generator, so results do not depend on how trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bounds::estimate_k_margin;
use crate::dataset::{LabelKind, SparseDataset};
use crate::error::{arg, Result};
use crate::smo::solve_csvc_gram;

/// C used as a hard-margin surrogate.
pub const HARD_MARGIN_C: f64 = 1e6;
const HARD_MARGIN_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    d: usize,
    k: usize,
    /// Row-major `d × k`.
    entries: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn sample<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || k == 0 {
            return arg("projection dimensions must be positive");
        }
        let entries = (0..d * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Ok(Self { d, k, entries })
    }

    pub fn from_entries(d: usize, k: usize, entries: Vec<f64>) -> Result<Self> {
        if d == 0 || k == 0 || entries.len() != d * k {
            return arg(format!("need {d} x {k} entries, got {}", entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return arg("projection entries must be finite");
        }
        Ok(Self { d, k, entries })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    /// `Rᵀu / √k`
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.d {
            return arg(format!("vector has length {}, projection expects {}", u.len(), self.d));
        }
        Ok(self.apply(u, 1.0 / (self.k as f64).sqrt()))
    }

    fn apply(&self, u: &[f64], scale: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            let row = &self.entries[i * self.k..(i + 1) * self.k];
            for (o, r) in out.iter_mut().zip(row) {
                *o += r * ui;
            }
        }
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }
}

/// Generator for trial `t` of a run seeded with `seed`.
fn trial_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

/// Stream reserved for the fixed test vectors.
const VECTOR_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub failures: usize,
    /// Theoretical failure probability (may exceed 1 when vacuous).
    pub bound: f64,
    pub empirical_rate: f64,
}

impl TrialSummary {
    fn new(trials: usize, failures: usize, bound: f64) -> Self {
        let empirical_rate = if trials == 0 { 0.0 } else { failures as f64 / trials as f64 };
        Self { trials, failures, bound, empirical_rate }
    }

    /// `bound + 3·√(bound/trials)`, the Monte-Carlo acceptance threshold.
    pub fn threshold(&self) -> f64 {
        self.bound + 3.0 * (self.bound / self.trials.max(1) as f64).sqrt()
    }

    pub fn within_bound(&self) -> bool {
        self.empirical_rate <= self.threshold()
    }
}

/// `2e^{-(ε²-ε³)k/4}`
pub fn norm_failure_bound(eps: f64, k: usize) -> f64 {
    2.0 * (-(eps * eps - eps * eps * eps) * k as f64 / 4.0).exp()
}

/// `4e^{-ε²k/8}`
pub fn dot_failure_bound(eps: f64, k: usize) -> f64 {
    4.0 * (-eps * eps * k as f64 / 8.0).exp()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        arg(format!("eps must lie in (0, 1), got {eps}"))
    }
}

fn count_failures(trials: usize, fail: impl Fn(u64) -> Result<bool> + Sync + Send) -> Result<usize> {
    let flags: Result<Vec<bool>> = (0..trials as u64).into_par_iter().map(fail).collect();
    Ok(flags?.into_iter().filter(|&f| f).count())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Counts trials where `‖u'‖²` leaves `[(1-ε)‖u‖², (1+ε)‖u‖²]`.
pub fn norm_trials(u: &[f64], k: usize, eps: f64, trials: usize, seed: u64) -> Result<TrialSummary> {
    check_eps(eps)?;
    let d = u.len();
    let sq = dot(u, u);
    let failures = count_failures(trials, |t| {
        let r = ProjectionMatrix::sample(d, k, &mut trial_rng(seed, t))?;
        let p = r.project(u)?;
        let psq = dot(&p, &p);
        Ok(psq < (1.0 - eps) * sq || psq > (1.0 + eps) * sq)
    })?;
    Ok(TrialSummary::new(trials, failures, norm_failure_bound(eps, k)))
}

/// Counts trials where `u'·v'` leaves `u·v ± (ε/2)(‖u‖² + ‖v‖²)`.
pub fn dot_trials(u: &[f64], v: &[f64], k: usize, eps: f64, trials: usize, seed: u64) -> Result<TrialSummary> {
    check_eps(eps)?;
    if u.len() != v.len() {
        return arg("u and v must have the same length");
    }
    let d = u.len();
    let uv = dot(u, v);
    let slack = eps / 2.0 * (dot(u, u) + dot(v, v));
    let failures = count_failures(trials, |t| {
        let r = ProjectionMatrix::sample(d, k, &mut trial_rng(seed, t))?;
        let pu = r.project(u)?;
        let pv = r.project(v)?;
        Ok((dot(&pu, &pv) - uv).abs() > slack)
    })?;
    Ok(TrialSummary::new(trials, failures, dot_failure_bound(eps, k)))
}

/// Norm distortion of one random unit vector in `R^d`.
pub fn check_norm_preservation(d: usize, k: usize, eps: f64, trials: usize, seed: u64) -> Result<TrialSummary> {
    if d == 0 || k == 0 {
        return arg("d and k must be positive");
    }
    let u = random_unit(d, &mut trial_rng(seed, VECTOR_STREAM));
    norm_trials(&u, k, eps, trials, seed)
}

/// Dot-product distortion of a random orthonormal pair in `R^d` (d ≥ 2).
pub fn check_dot_preservation(d: usize, k: usize, eps: f64, trials: usize, seed: u64) -> Result<TrialSummary> {
    if d < 2 || k == 0 {
        return arg("need d >= 2 and k >= 1");
    }
    let mut rng = trial_rng(seed, VECTOR_STREAM);
    let u = random_unit(d, &mut rng);
    let v = loop {
        let w = random_unit(d, &mut rng);
        let proj = dot(&u, &w);
        let r: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
        let n = dot(&r, &r).sqrt();
        if n > 1e-6 {
            break r.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    dot_trials(&u, &v, k, eps, trials, seed)
}

/// Hard-margin fit on a Gram matrix; returns the geometric margin
/// `min_i y_i f(x_i) / ‖w‖`, or 0 when no positive margin is attained.
pub fn hard_margin(gram: &[f64], labels: &[f64]) -> Result<f64> {
    let m = labels.len();
    let sol = solve_csvc_gram(gram, labels, HARD_MARGIN_C, HARD_MARGIN_TOL)?;
    if sol.w_sq_norm.is_nan() || sol.w_sq_norm <= 0.0 {
        return Ok(0.0);
    }
    let mut worst = f64::INFINITY;
    for i in 0..m {
        let f = dot(&gram[i * m..(i + 1) * m], &sol.dual_coef) + sol.bias;
        worst = worst.min(labels[i] * f);
    }
    Ok((worst / sol.w_sq_norm.sqrt()).max(0.0))
}

fn gram_of(points: &[Vec<f64>]) -> Vec<f64> {
    let m = points.len();
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = dot(&points[i], &points[j]);
            g[i * m + j] = v;
            g[j * m + i] = v;
        }
    }
    g
}

#[derive(Clone, Debug)]
pub struct MarginReport {
    pub summary: TrialSummary,
    pub l_star: f64,
    pub max_norm: f64,
    pub k: usize,
    /// Projected margin of every trial, in trial order.
    pub projected: Vec<f64>,
}

/// Projects `ds` through fresh `d × k` matrices and counts trials whose
/// hard margin falls below `l*(1-γ)`, with `k` from the margin bound at the
/// true `l*` and `L`. The summary's `bound` is δ.
pub fn check_margin_preservation(
    ds: &SparseDataset,
    gamma: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<MarginReport> {
    let (points, l_star, max_norm) = separable_points(ds)?;
    let k = estimate_k_margin(gamma, delta, ds.len(), max_norm, l_star, 0.0)?;
    margin_trials_inner(ds, &points, l_star, max_norm, gamma, delta, k, trials, seed)
}

/// As [`check_margin_preservation`] with a caller-chosen `k`.
pub fn check_margin_preservation_with_k(
    ds: &SparseDataset,
    gamma: f64,
    delta: f64,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MarginReport> {
    if !(gamma > 0.0 && gamma < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return arg("gamma and delta must lie in (0, 1)");
    }
    let (points, l_star, max_norm) = separable_points(ds)?;
    margin_trials_inner(ds, &points, l_star, max_norm, gamma, delta, k, trials, seed)
}

fn separable_points(ds: &SparseDataset) -> Result<(Vec<Vec<f64>>, f64, f64)> {
    let n = ds.len();
    if n == 0 || n > crate::oracle::DENSE_LIMIT {
        return arg(format!("margin check needs 1..={} points, got {n}", crate::oracle::DENSE_LIMIT));
    }
    if ds.kind() != LabelKind::Binary {
        return arg("margin check needs +1/-1 labels");
    }
    let d = ds.dim().max(1);
    let points: Vec<Vec<f64>> = ds.examples().iter().map(|x| x.to_dense(d)).collect();
    let l_star = hard_margin(&gram_of(&points), ds.labels())?;
    if l_star.is_nan() || l_star <= 0.0 {
        return arg("data set is not linearly separable");
    }
    let max_norm = ds.examples().iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok((points, l_star, max_norm))
}

#[allow(clippy::too_many_arguments)]
fn margin_trials_inner(
    ds: &SparseDataset,
    points: &[Vec<f64>],
    l_star: f64,
    max_norm: f64,
    gamma: f64,
    delta: f64,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MarginReport> {
    if k == 0 {
        return arg("k must be positive");
    }
    let d = points[0].len();
    let projected: Result<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let r = ProjectionMatrix::sample(d, k, &mut trial_rng(seed, t))?;
            let proj: Vec<Vec<f64>> = points.iter().map(|p| r.project(p)).collect::<Result<_>>()?;
            hard_margin(&gram_of(&proj), ds.labels())
        })
        .collect();
    let projected = projected?;
    let failures = projected.iter().filter(|&&lp| lp < l_star * (1.0 - gamma)).count();
    Ok(MarginReport {
        summary: TrialSummary::new(trials, failures, delta),
        l_star,
        max_norm,
        k,
        projected,
    })
}

/// Zero-pads a k-dimensional separator to d dimensions; the bias is kept.
pub fn orthogonal_extension(w_p: &[f64], b: f64, d: usize) -> Result<(Vec<f64>, f64)> {
    if w_p.len() > d {
        return arg(format!("cannot extend a {}-vector into {d} dimensions", w_p.len()));
    }
    let mut w = w_p.to_vec();
    w.resize(d, 0.0);
    Ok((w, b))
}

/// `Rᵀx/√k` for a square `d × d` matrix. The first `k` coordinates are the
/// projection of `x` through the first `k` columns of `R`.
pub fn rotate_scaled(r: &ProjectionMatrix, x: &[f64], k: usize) -> Result<Vec<f64>> {
    if r.d() != r.k() {
        return arg("rotation matrix must be square");
    }
    if x.len() != r.d() {
        return arg("vector length does not match the rotation");
    }
    if k == 0 || k > r.d() {
        return arg(format!("k must lie in 1..={}", r.d()));
    }
    Ok(r.apply(x, 1.0 / (k as f64).sqrt()))
}

/// The `d × k` matrix made of the first `k` columns of `r`.
pub fn leading_columns(r: &ProjectionMatrix, k: usize) -> Result<ProjectionMatrix> {
    if k == 0 || k > r.k() {
        return arg(format!("k must lie in 1..={}", r.k()));
    }
    let entries = (0..r.d()).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| r.entry(i, j)).collect();
    ProjectionMatrix::from_entries(r.d(), k, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SparseVec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_projects_to_zero_and_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = ProjectionMatrix::sample(30, 12, &mut rng).unwrap();
        assert!(r.project(&[0.0; 30]).unwrap().iter().all(|&v| v == 0.0));
        let u = random_unit(30, &mut rng);
        let v = random_unit(30, &mut rng);
        let (a, b) = (1.7, -0.4);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = r.project(&mix).unwrap();
        let (pu, pv) = (r.project(&u).unwrap(), r.project(&v).unwrap());
        for j in 0..12 {
            assert_abs_diff_eq!(lhs[j], a * pu[j] + b * pv[j], epsilon = 1e-12);
        }
        assert!(r.project(&[1.0; 29]).is_err());
    }

    #[test]
    fn projection_matches_explicit_transpose_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = ProjectionMatrix::sample(7, 5, &mut rng).unwrap();
        let u: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let m = nalgebra::DMatrix::from_fn(7, 5, |i, j| r.entry(i, j));
        let expect = m.transpose() * nalgebra::DVector::from_vec(u.clone()) / 5f64.sqrt();
        let got = r.project(&u).unwrap();
        for j in 0..5 {
            assert_abs_diff_eq!(got[j], expect[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn squared_norm_is_unbiased() {
        let d = 20;
        let u = random_unit(d, &mut ChaCha8Rng::seed_from_u64(3));
        let draws = 100_000u64;
        let total: f64 = (0..draws)
            .into_par_iter()
            .map(|t| {
                let r = ProjectionMatrix::sample(d, 4, &mut trial_rng(77, t)).unwrap();
                let p = r.project(&u).unwrap();
                dot(&p, &p)
            })
            .sum();
        let mean = total / draws as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn bound_values() {
        assert_abs_diff_eq!(norm_failure_bound(0.3, 200), 2.0 * (-3.15f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(norm_failure_bound(0.3, 200), 0.0857, epsilon = 1e-4);
        assert_abs_diff_eq!(dot_failure_bound(0.25, 400), 4.0 * (-3.125f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(dot_failure_bound(0.25, 400), 0.176, epsilon = 1e-3);
    }

    #[test]
    fn norm_rate_under_bound_and_falls_with_k() {
        let a = check_norm_preservation(200, 50, 0.3, 2000, 5).unwrap();
        let b = check_norm_preservation(200, 200, 0.3, 2000, 5).unwrap();
        assert!(b.empirical_rate < a.empirical_rate, "{a:?} {b:?}");
        assert!(b.within_bound());
        assert!(a.failures <= a.trials);
    }

    #[test]
    fn vacuous_bound_still_summarized() {
        let s = check_norm_preservation(50, 10, 0.999, 200, 6).unwrap();
        assert!(s.bound > 1.0);
        assert!((0.0..=1.0).contains(&s.empirical_rate));
        assert!(check_norm_preservation(50, 10, 1.0, 10, 6).is_err());
        assert!(check_dot_preservation(50, 10, 0.0, 10, 6).is_err());
    }

    #[test]
    fn dot_check_cases() {
        let s = check_dot_preservation(100, 200, 0.25, 1000, 8).unwrap();
        assert!(s.within_bound(), "{s:?}");
        let zero = vec![0.0; 40];
        let mut v = vec![0.0; 40];
        v[3] = 1.0;
        let s = dot_trials(&zero, &v, 10, 0.2, 300, 9).unwrap();
        assert_eq!(s.failures, 0);
        // u = v reduces to a norm check with slack ε.
        let u = random_unit(40, &mut ChaCha8Rng::seed_from_u64(4));
        let same = dot_trials(&u, &u, 30, 0.3, 400, 10).unwrap();
        let norm = norm_trials(&u, 30, 0.3, 400, 10).unwrap();
        assert_eq!(same.failures, norm.failures);
    }

    #[test]
    fn trials_are_order_independent() {
        let a = check_norm_preservation(60, 20, 0.2, 500, 12).unwrap();
        let u = random_unit(60, &mut trial_rng(12, VECTOR_STREAM));
        let sequential = (0..500u64)
            .filter(|&t| {
                let r = ProjectionMatrix::sample(60, 20, &mut trial_rng(12, t)).unwrap();
                let p = r.project(&u).unwrap();
                let s = dot(&p, &p);
                !(0.8..=1.2).contains(&s)
            })
            .count();
        assert_eq!(a.failures, sequential);
    }

    fn two_points_in(d: usize) -> SparseDataset {
        let mut a = vec![0.0; d];
        a[0] = 1.0;
        let mut b = vec![0.0; d];
        b[0] = -1.0;
        SparseDataset::new(
            vec![SparseVec::from_dense(&a), SparseVec::from_dense(&b)],
            vec![1.0, -1.0],
            LabelKind::Binary,
        )
        .unwrap()
    }

    #[test]
    fn two_point_margin() {
        let ds = two_points_in(50);
        let rep = check_margin_preservation(&ds, 0.5, 0.5, 100, 13).unwrap();
        assert_abs_diff_eq!(rep.l_star, 1.0, epsilon = 1e-6);
        assert!(rep.summary.empirical_rate <= 0.5);
        assert!(rep.projected.iter().all(|&lp| lp >= 0.0));
        // Two points ±u' have margin ‖u'‖.
        for (t, &lp) in rep.projected.iter().enumerate().take(10) {
            let r = ProjectionMatrix::sample(50, rep.k, &mut trial_rng(13, t as u64)).unwrap();
            let mut e1 = vec![0.0; 50];
            e1[0] = 1.0;
            let p = r.project(&e1).unwrap();
            assert_abs_diff_eq!(lp, dot(&p, &p).sqrt(), epsilon = 1e-5);
        }
    }

    #[test]
    fn margin_failures_fall_as_gamma_grows() {
        let ds = two_points_in(20);
        let mut prev = usize::MAX;
        for gamma in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let rep = check_margin_preservation_with_k(&ds, gamma, 0.5, 8, 300, 14).unwrap();
            assert!(rep.summary.failures <= prev);
            prev = rep.summary.failures;
        }
    }

    #[test]
    fn nonseparable_input_rejected() {
        let ds = SparseDataset::new(
            vec![
                SparseVec::from_dense(&[1.0, 1.0]),
                SparseVec::from_dense(&[-1.0, -1.0]),
                SparseVec::from_dense(&[1.0, -1.0]),
                SparseVec::from_dense(&[-1.0, 1.0]),
            ],
            vec![1.0, 1.0, -1.0, -1.0],
            LabelKind::Binary,
        )
        .unwrap();
        assert!(check_margin_preservation(&ds, 0.5, 0.5, 5, 1).is_err());
    }

    #[test]
    fn extension_pads_and_transfers_margin() {
        assert_eq!(orthogonal_extension(&[1.0, 2.0], 0.5, 4).unwrap(), (vec![1.0, 2.0, 0.0, 0.0], 0.5));
        assert_eq!(orthogonal_extension(&[1.0, 2.0], 0.5, 2).unwrap(), (vec![1.0, 2.0], 0.5));
        assert!(orthogonal_extension(&[1.0, 2.0, 3.0], 0.0, 2).is_err());

        let (d, k, n) = (12, 5, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let full = ProjectionMatrix::sample(d, d, &mut rng).unwrap();
            let head = leading_columns(&full, k).unwrap();
            let w_p: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = rng.random_range(-0.5..0.5);
            let (w, b2) = orthogonal_extension(&w_p, b, d).unwrap();
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let xp = head.project(&x).unwrap();
                let xh = rotate_scaled(&full, &x, k).unwrap();
                let y = if dot(&w_p, &xp) + b >= 0.0 { 1.0 } else { -1.0 };
                let margin_p = y * (dot(&w_p, &xp) + b);
                let margin_h = y * (dot(&w, &xh) + b2);
                assert_abs_diff_eq!(margin_p, margin_h, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn extension_dot_products_split() {
        let (d, k) = (10, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let full = ProjectionMatrix::sample(d, d, &mut rng).unwrap();
        let head = leading_columns(&full, k).unwrap();
        let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xj: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (hi, hj) = (rotate_scaled(&full, &xi, k).unwrap(), rotate_scaled(&full, &xj, k).unwrap());
        let (pi, pj) = (head.project(&xi).unwrap(), head.project(&xj).unwrap());
        let residual: f64 = hi[k..].iter().zip(&hj[k..]).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(dot(&hi, &hj), dot(&pi, &pj) + residual, epsilon = 1e-12);
        assert!(rotate_scaled(&head, &xi, k).is_err());
    }
}
