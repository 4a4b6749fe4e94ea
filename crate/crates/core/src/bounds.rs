//! Working-set sizes from random-projection bounds on the number of support
//! vectors.
//!
//! Every estimator returns an upper bound `k` on the support vectors needed;
//! the training loops then draw working sets of size `r = ⌈c·k⌉`. Logs are
//! natural: the bounds come from inverting `n·4e^{-ε²k/8} ≤ δ`.

use crate::dataset::DatasetStats;
use crate::error::{arg, Result};

pub const DEFAULT_C_MULT: f64 = 2.0;
pub const DEFAULT_DELTA: f64 = 0.9;
pub const DEFAULT_EPS_JL: f64 = 0.2;

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        arg(format!("{name} must lie in (0, 1), got {v}"))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        arg("n must be at least 1")
    } else {
        Ok(())
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa >= 0.0 {
        Ok(())
    } else {
        arg(format!("kappa must be a nonnegative real, got {kappa}"))
    }
}

fn log_term(n: usize, delta: f64) -> f64 {
    (4.0 * n as f64 / delta).ln()
}

fn to_count(v: f64) -> Result<usize> {
    if !v.is_finite() || v > usize::MAX as f64 / 2.0 {
        return arg(format!("bound is not representable: {v}"));
    }
    Ok((v.ceil() as usize).max(1))
}

/// Real-valued margin bound before rounding.
pub fn k_margin_real(gamma: f64, delta: f64, n: usize, max_norm: f64, margin_lb: f64, kappa: f64) -> Result<f64> {
    check_open_unit("gamma", gamma)?;
    check_open_unit("delta", delta)?;
    check_n(n)?;
    check_kappa(kappa)?;
    if !(margin_lb.is_finite() && margin_lb > 0.0) {
        return arg(format!("margin lower bound must be positive, got {margin_lb}"));
    }
    if !(max_norm.is_finite() && max_norm >= 0.0) {
        return arg(format!("max norm must be nonnegative, got {max_norm}"));
    }
    let spread = 1.0 + (1.0 + max_norm * max_norm) / (2.0 * margin_lb);
    Ok(8.0 / (gamma * gamma) * spread * spread * log_term(n, delta) + kappa * n as f64)
}

/// `⌈(8/γ²)(1 + (1+L²)/(2l))² ln(4n/δ) + κn⌉`
pub fn estimate_k_margin(gamma: f64, delta: f64, n: usize, max_norm: f64, margin_lb: f64, kappa: f64) -> Result<usize> {
    to_count(k_margin_real(gamma, delta, n, max_norm, margin_lb, kappa)?)
}

pub fn k_from_eps_real(eps_jl: f64, delta: f64, n: usize) -> Result<f64> {
    check_open_unit("eps", eps_jl)?;
    check_open_unit("delta", delta)?;
    check_n(n)?;
    Ok(16.0 / (eps_jl * eps_jl) * log_term(n, delta))
}

/// `⌈(16/ε²) ln(4n/δ)⌉`
pub fn estimate_k_from_eps(eps_jl: f64, delta: f64, n: usize) -> Result<usize> {
    to_count(k_from_eps_real(eps_jl, delta, n)?)
}

pub fn k_nonsep_real(eps_jl: f64, delta: f64, n: usize) -> Result<f64> {
    Ok(2.0 * k_from_eps_real(eps_jl, delta, n)?)
}

/// `⌈(32/ε²) ln(4n/δ)⌉`, used for data that is not separable.
pub fn estimate_k_nonsep(eps_jl: f64, delta: f64, n: usize) -> Result<usize> {
    to_count(k_nonsep_real(eps_jl, delta, n)?)
}

pub fn k_regression_real(
    gamma: f64,
    delta: f64,
    n: usize,
    max_norm: f64,
    w_norm: f64,
    tube_eps: f64,
    kappa: f64,
) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return arg(format!("gamma must be positive, got {gamma}"));
    }
    check_open_unit("delta", delta)?;
    check_n(n)?;
    check_kappa(kappa)?;
    if !(tube_eps.is_finite() && tube_eps > 0.0) {
        return arg(format!("tube epsilon must be positive for the regression bound, got {tube_eps}"));
    }
    if !(w_norm.is_finite() && w_norm > 0.0) {
        return arg(format!("W must be positive, got {w_norm}"));
    }
    if !(max_norm.is_finite() && max_norm >= 0.0) {
        return arg(format!("max norm must be nonnegative, got {max_norm}"));
    }
    let ratio = (w_norm * w_norm + max_norm * max_norm) / (gamma * tube_eps);
    Ok(2.0 * ratio * ratio * log_term(n, delta) + kappa * n as f64)
}

/// `⌈2((W²+L²)/(γε))² ln(4n/δ) + κn⌉`
pub fn estimate_k_regression(
    gamma: f64,
    delta: f64,
    n: usize,
    max_norm: f64,
    w_norm: f64,
    tube_eps: f64,
    kappa: f64,
) -> Result<usize> {
    to_count(k_regression_real(gamma, delta, n, max_norm, w_norm, tube_eps, kappa)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanKind {
    Separable,
    Nonseparable,
    Regression,
}

/// Inputs to [`make_plan`]. Unused fields must stay `None` for the chosen kind.
#[derive(Clone, Debug)]
pub struct PlanParams {
    pub c_mult: f64,
    pub delta: f64,
    pub eps_jl: Option<f64>,
    pub gamma: Option<f64>,
    /// Explicit κ. When absent and `almost_separable` is set, ln(n)/n.
    pub kappa: Option<f64>,
    pub almost_separable: bool,
    pub margin_lb: Option<f64>,
    pub tube_eps: Option<f64>,
    /// Defaults to 1/tube_eps.
    pub w_norm: Option<f64>,
    pub k_override: Option<usize>,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            c_mult: DEFAULT_C_MULT,
            delta: DEFAULT_DELTA,
            eps_jl: None,
            gamma: None,
            kappa: None,
            almost_separable: false,
            margin_lb: None,
            tube_eps: None,
            w_norm: None,
            k_override: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePlan {
    pub kind: PlanKind,
    pub k: usize,
    pub r: usize,
    pub c: f64,
    pub gamma: Option<f64>,
    pub eps_jl: Option<f64>,
    pub delta: f64,
    pub kappa: f64,
    pub margin_lb: Option<f64>,
    pub max_norm: f64,
    pub n: usize,
    pub tube_eps: Option<f64>,
    pub w_norm: Option<f64>,
    /// k or r was cut down to n.
    pub clamped: bool,
}

/// Picks the estimator for `kind`, then sets `r = ⌈c·k⌉` and clamps both to n.
///
/// Separable data uses the margin bound when `gamma` and `margin_lb` are
/// given and the ε-only bound otherwise.
pub fn make_plan(kind: PlanKind, stats: &DatasetStats, p: &PlanParams) -> Result<SamplePlan> {
    let n = stats.n;
    check_n(n)?;
    if !(p.c_mult.is_finite() && p.c_mult > 0.0) {
        return arg(format!("sample multiplier c must be positive, got {}", p.c_mult));
    }
    check_open_unit("delta", p.delta)?;
    let kappa = match (p.kappa, p.almost_separable) {
        (Some(v), _) => v,
        (None, true) => (n as f64).ln() / n as f64,
        (None, false) => 0.0,
    };
    check_kappa(kappa)?;
    let l = stats.max_norm;
    let mut w_norm = None;

    match kind {
        PlanKind::Separable | PlanKind::Nonseparable => {
            if p.tube_eps.is_some() || p.w_norm.is_some() {
                return arg("tube epsilon and W only apply to regression plans");
            }
        }
        PlanKind::Regression => {
            if p.margin_lb.is_some() || p.eps_jl.is_some() {
                return arg("margin lower bound and projection eps do not apply to regression plans");
            }
        }
    }
    if kind == PlanKind::Nonseparable && (p.margin_lb.is_some() || p.gamma.is_some()) {
        return arg("nonseparable plans take only eps and delta");
    }

    let k_raw = if let Some(k) = p.k_override {
        if k == 0 {
            return arg("k override must be at least 1");
        }
        if kind == PlanKind::Regression {
            w_norm = p.w_norm.or(p.tube_eps.map(|e| 1.0 / e));
        }
        k
    } else {
        match kind {
            PlanKind::Separable => match (p.gamma, p.margin_lb) {
                (Some(g), Some(lb)) => estimate_k_margin(g, p.delta, n, l, lb, kappa)?,
                (None, None) => estimate_k_from_eps(p.eps_jl.unwrap_or(DEFAULT_EPS_JL), p.delta, n)?,
                _ => return arg("the margin bound needs both gamma and a margin lower bound"),
            },
            PlanKind::Nonseparable => estimate_k_nonsep(p.eps_jl.unwrap_or(DEFAULT_EPS_JL), p.delta, n)?,
            PlanKind::Regression => {
                let (Some(g), Some(e)) = (p.gamma, p.tube_eps) else {
                    return arg("regression plans need gamma and the tube epsilon");
                };
                if e.is_nan() || e <= 0.0 {
                    return arg("tube epsilon must be positive for the regression bound");
                }
                let w = p.w_norm.unwrap_or(1.0 / e);
                w_norm = Some(w);
                estimate_k_regression(g, p.delta, n, l, w, e, kappa)?
            }
        }
    };

    let r_raw = (p.c_mult * k_raw as f64).ceil();
    let k = k_raw.min(n);
    let r = if r_raw >= n as f64 { n } else { (r_raw as usize).max(k) };
    let clamped = k_raw > n || r_raw > n as f64;
    let eps_jl = match kind {
        PlanKind::Regression => None,
        _ if p.k_override.is_some() => p.eps_jl,
        PlanKind::Separable if p.gamma.is_some() => p.eps_jl,
        _ => Some(p.eps_jl.unwrap_or(DEFAULT_EPS_JL)),
    };
    Ok(SamplePlan {
        kind,
        k,
        r,
        c: p.c_mult,
        gamma: p.gamma,
        eps_jl,
        delta: p.delta,
        kappa,
        margin_lb: p.margin_lb,
        max_norm: l,
        n,
        tube_eps: p.tube_eps,
        w_norm,
        clamped,
    })
}
