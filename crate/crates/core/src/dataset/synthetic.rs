//! Synthetic benchmark generators. Every generator is a pure function of
//! `(n, seed)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{LabelKind, SparseDataset, SparseVec};
use crate::error::{arg, Result};

/// Per-coordinate class mean magnitude `2 / sqrt(20)` for twonorm/ringnorm.
pub const TWONORM_MEAN: f64 = 0.447_213_595_499_958;

const NORM_DIM: usize = 20;
const FRIEDMAN_DIM: usize = 10;

fn gaussian_point(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> SparseVec {
    let x: Vec<f64> = (0..NORM_DIM)
        .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SparseVec::from_dense(&x)
}

/// Two-class Gaussian mixture generator; the first `ceil(n/2)` examples are
/// positives.
fn two_gaussians(
    n: usize,
    seed: u64,
    pos: (f64, f64),
    neg: (f64, f64),
) -> Result<SparseDataset> {
    if n < 2 {
        return arg("need at least two examples, one per class");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = n.div_ceil(2);
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (label, (mean, sd)) = if i < n_pos { (1.0, pos) } else { (-1.0, neg) };
        examples.push(gaussian_point(&mut rng, mean, sd));
        labels.push(label);
    }
    SparseDataset::new(examples, labels, LabelKind::Binary)
}

/// 20-d twonorm: positives ~ N(a·1, I), negatives ~ N(-a·1, I).
pub fn gen_twonorm(n: usize, seed: u64) -> Result<SparseDataset> {
    two_gaussians(n, seed, (TWONORM_MEAN, 1.0), (-TWONORM_MEAN, 1.0))
}

/// 20-d ringnorm: positives ~ N(1, 4I), negatives ~ N(a·1, I).
pub fn gen_ringnorm(n: usize, seed: u64) -> Result<SparseDataset> {
    two_gaussians(n, seed, (1.0, 2.0), (TWONORM_MEAN, 1.0))
}

/// Checkerboard label: -1 when the integer parts of both coordinates have
/// the same parity, +1 otherwise.
pub fn checkerboard_label(x1: f64, x2: f64) -> f64 {
    let p1 = (x1.floor() as i64).rem_euclid(2);
    let p2 = (x2.floor() as i64).rem_euclid(2);
    if p1 == p2 {
        -1.0
    } else {
        1.0
    }
}

/// Points uniform on [0,4)², labeled by the 4x4 checkerboard.
pub fn gen_checkerboard(n: usize, seed: u64) -> Result<SparseDataset> {
    if n < 1 {
        return arg("need at least one example");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.random_range(0.0..4.0);
        let x2 = rng.random_range(0.0..4.0);
        labels.push(checkerboard_label(x1, x2));
        examples.push(SparseVec::from_dense(&[x1, x2]));
    }
    SparseDataset::new(examples, labels, LabelKind::Binary)
}

/// Noise-free Friedman surface `10 sin(pi x1 x2) + 20 (x3 - 0.5) + 10 x4 + 5 x5`.
/// Coordinates past the fifth are ignored.
pub fn friedman_surface(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4]
}

/// 10 inputs uniform on [0,1), target = surface + N(0,1).
pub fn gen_friedman_regression(n: usize, seed: u64) -> Result<SparseDataset> {
    if n < 1 {
        return arg("need at least one example");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..FRIEDMAN_DIM).map(|_| rng.random::<f64>()).collect();
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(friedman_surface(&x) + noise);
        examples.push(SparseVec::from_dense(&x));
    }
    SparseDataset::new(examples, labels, LabelKind::Real)
}

/// Linearly separable data in `d ≥ 2` dimensions. The label alternates
/// +1/-1; each point sits at signed distance `y·(gap + U(0, 0.5))` along the
/// first axis, plus Gaussian noise of norm about 0.5 in the other axes. The
/// hard margin is therefore at least `gap`.
pub fn gen_separable(n: usize, d: usize, gap: f64, seed: u64) -> Result<SparseDataset> {
    if n < 2 || d < 2 {
        return arg("need n >= 2 and d >= 2");
    }
    if !(gap.is_finite() && gap > 0.0) {
        return arg(format!("gap must be positive, got {gap}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = 0.5 / ((d - 1) as f64).sqrt();
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut x = vec![y * (gap + rng.random_range(0.0..0.5))];
        x.extend((1..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)));
        examples.push(SparseVec::from_dense(&x));
        labels.push(y);
    }
    SparseDataset::new(examples, labels, LabelKind::Binary)
}

/// [`gen_separable`] with the labels of `⌈flip·n⌉` random points flipped.
pub fn gen_almost_separable(n: usize, d: usize, gap: f64, flip: f64, seed: u64) -> Result<SparseDataset> {
    if !(0.0..1.0).contains(&flip) {
        return arg(format!("flip fraction must lie in [0, 1), got {flip}"));
    }
    let clean = gen_separable(n, d, gap, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f11b);
    let mut labels = clean.labels().to_vec();
    let count = (flip * n as f64).ceil() as usize;
    for i in rand::seq::index::sample(&mut rng, n, count.min(n)) {
        labels[i] = -labels[i];
    }
    SparseDataset::new(clean.examples().to_vec(), labels, LabelKind::Binary)
}
