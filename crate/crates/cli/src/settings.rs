//! Training settings merged from command-line flags and bench config files.

use serde::Deserialize;

use randsvm::bounds::{make_plan, PlanKind, PlanParams, DEFAULT_C_MULT, DEFAULT_DELTA};
use randsvm::dataset::{stats, LabelKind, SparseDataset};
use randsvm::kernels::KernelSpec;
use randsvm::model::Task;
use randsvm::train::TrainConfig;

use crate::args::{Algo, Generator, KernelArg, ModelOpts, PlanArg, TaskArg};
use crate::{CliError, CliResult};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TUBE_EPS: f64 = 0.1;

/// Every field is optional; unset fields fall through to the next layer.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub generator: Option<Generator>,
    pub train_n: Option<usize>,
    pub test_n: Option<usize>,
    pub algos: Option<Vec<Algo>>,
    pub seeds: Option<Vec<u64>>,
    pub sign_accuracy: Option<bool>,
    pub kernel: Option<KernelArg>,
    pub sigma: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub task: Option<TaskArg>,
    pub tube_eps: Option<f64>,
    pub plan: Option<PlanArg>,
    pub gamma: Option<f64>,
    pub eps_jl: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub almost_separable: Option<bool>,
    pub margin_lb: Option<f64>,
    pub w_norm: Option<f64>,
    pub c_mult: Option<f64>,
    pub k_override: Option<usize>,
    pub kkt_tol: Option<f64>,
    pub viol_tol: Option<f64>,
    pub max_outer_iters: Option<usize>,
}

macro_rules! overlay_fields {
    ($top:ident, $base:ident, $($f:ident),*) => {
        Settings { $($f: $top.$f.clone().or($base.$f.clone()),)* }
    };
}

impl Settings {
    pub fn from_opts(o: &ModelOpts) -> Self {
        Settings {
            kernel: o.kernel,
            sigma: o.sigma,
            c: o.c,
            task: o.task,
            tube_eps: o.tube_eps,
            plan: o.plan,
            gamma: o.gamma,
            eps_jl: o.eps_jl,
            delta: o.delta,
            kappa: o.kappa,
            almost_separable: o.almost_separable.then_some(true),
            margin_lb: o.margin_lb,
            w_norm: o.w_norm,
            c_mult: o.c_mult,
            k_override: o.k_override,
            kkt_tol: o.kkt_tol,
            viol_tol: o.viol_tol,
            max_outer_iters: o.max_outer_iters,
            ..Default::default()
        }
    }

    /// Fields set in `top` win over those in `self`.
    pub fn overlay(&self, top: &Settings) -> Settings {
        let base = self;
        overlay_fields!(
            top, base, generator, train_n, test_n, algos, seeds, sign_accuracy, kernel, sigma, c, task,
            tube_eps, plan, gamma, eps_jl, delta, kappa, almost_separable, margin_lb, w_norm, c_mult,
            k_override, kkt_tol, viol_tol, max_outer_iters
        )
    }

    pub fn check_kernel(&self) -> CliResult<KernelSpec> {
        match self.kernel.unwrap_or(KernelArg::Linear) {
            KernelArg::Linear => Ok(KernelSpec::Linear),
            KernelArg::Gaussian => {
                let sigma = self.sigma.ok_or_else(|| CliError::usage("--sigma is required with the gaussian kernel"))?;
                KernelSpec::gaussian(sigma).map_err(|e| CliError::usage(e.to_string()))
            }
        }
    }

    pub fn task_for(&self, ds: &SparseDataset) -> CliResult<Task> {
        let task = self.task.unwrap_or(match ds.kind() {
            LabelKind::Binary => TaskArg::Classify,
            LabelKind::Real => TaskArg::Regress,
        });
        match task {
            TaskArg::Classify if ds.kind() == LabelKind::Real => {
                Err(CliError::usage("classification needs +1/-1 labels"))
            }
            TaskArg::Classify => Ok(Task::Classify),
            TaskArg::Regress => {
                let eps = self.tube_eps.unwrap_or(DEFAULT_TUBE_EPS);
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(CliError::usage(format!("--tube-eps must be nonnegative, got {eps}")));
                }
                Ok(Task::Regress { epsilon: eps })
            }
        }
    }

    /// Resolves kernel, task and sample plan for training on `ds`.
    pub fn train_config(&self, ds: &SparseDataset, seed: u64) -> CliResult<TrainConfig> {
        let kernel = self.check_kernel()?;
        let task = self.task_for(ds)?;
        let c = self.c.unwrap_or(DEFAULT_C);
        if !(c.is_finite() && c > 0.0) {
            return Err(CliError::usage(format!("--C must be positive, got {c}")));
        }
        let kind = match self.plan.unwrap_or(PlanArg::Nonseparable) {
            PlanArg::Separable => PlanKind::Separable,
            PlanArg::Nonseparable => PlanKind::Nonseparable,
            PlanArg::Regression => PlanKind::Regression,
        };
        let regression_plan = kind == PlanKind::Regression;
        if regression_plan && task == Task::Classify {
            return Err(CliError::usage("the regression plan needs the regress task"));
        }
        let params = PlanParams {
            c_mult: self.c_mult.unwrap_or(DEFAULT_C_MULT),
            delta: self.delta.unwrap_or(DEFAULT_DELTA),
            eps_jl: if regression_plan { None } else { self.eps_jl },
            gamma: self.gamma,
            kappa: self.kappa,
            almost_separable: self.almost_separable.unwrap_or(false),
            margin_lb: self.margin_lb,
            tube_eps: match task {
                Task::Regress { epsilon } if regression_plan => Some(epsilon),
                _ => None,
            },
            w_norm: if regression_plan { self.w_norm } else { None },
            k_override: self.k_override,
        };
        let st = stats(ds).map_err(|e| CliError::usage(e.to_string()))?;
        let plan = make_plan(kind, &st, &params).map_err(|e| CliError::usage(e.to_string()))?;
        let mut cfg = TrainConfig::new(plan, task, c, kernel);
        cfg.seed = seed;
        if let Some(t) = self.kkt_tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::usage("--kkt-tol must be positive"));
            }
            cfg.kkt_tol = t;
        }
        if let Some(t) = self.viol_tol {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::usage("--viol-tol must be nonnegative"));
            }
            cfg.viol_tol = t;
        }
        if let Some(m) = self.max_outer_iters {
            if m == 0 {
                return Err(CliError::usage("--max-outer-iters must be at least 1"));
            }
            cfg.max_outer_iters = m;
        }
        Ok(cfg)
    }
}
