use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparseDataset;
use crate::error::{arg, Result};

/// Draws `r` distinct indices with inclusion probability increasing in the
/// example weight. Returned indices are sorted ascending.
pub fn weighted_sample(ds: &SparseDataset, r: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    weighted_sample_from(ds.weights(), r, &mut rng)
}

/// Exponential-keys sampling without replacement: each index gets the key
/// `-ln(U) / w_i` and the `r` smallest keys win.
pub fn weighted_sample_from<R: Rng + ?Sized>(
    weights: &[f64],
    r: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = weights.len();
    if r == 0 {
        return arg("sample size must be at least 1");
    }
    if r > n {
        return arg(format!("sample size {r} exceeds population {n}"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return arg("weights must be positive and finite");
    }
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            // 1 - U lies in (0, 1], so the key is finite and nonnegative.
            let u: f64 = 1.0 - rng.random::<f64>();
            (-u.ln() / w, i)
        })
        .collect();
    if r < n {
        keyed.select_nth_unstable_by(r - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut out: Vec<usize> = keyed[..r].iter().map(|&(_, i)| i).collect();
    out.sort_unstable();
    Ok(out)
}

/// Uniform sample of `r` distinct indices out of `0..n`, sorted ascending.
pub fn uniform_sample<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<Vec<usize>> {
    if r > n {
        return arg(format!("sample size {r} exceeds population {n}"));
    }
    let mut out = index::sample(rng, n, r).into_vec();
    out.sort_unstable();
    Ok(out)
}
