//! Command-line driver: `gen`, `train`, `predict`, `bench` and `lab`.
//!
//! [`run`] takes the argument list and output streams so the whole CLI can be
//! driven in-process by tests. Exit statuses: 0 success, 1 runtime failure,
//! 2 usage error.

pub mod args;
pub mod bench;
pub mod metrics;
pub mod settings;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use clap::Parser;

use randsvm::dataset::{
    gen_checkerboard, gen_friedman_regression, gen_ringnorm, gen_separable, gen_twonorm, load_libsvm,
    save_libsvm, SparseDataset,
};
use randsvm::lab::{check_dot_preservation, check_margin_preservation, check_margin_preservation_with_k, check_norm_preservation};
use randsvm::model::{predict, SvmModel, Task};
use randsvm::train::{train_full, train_violator_resampling, train_weighted_resampling, TrainConfig, TrainReport, Termination};

use args::{Algo, Check, Cli, Command, GenArgs, Generator, LabArgs, PredictArgs, TrainArgs};
use settings::Settings;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<randsvm::Error> for CliError {
    fn from(e: randsvm::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return 2;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli, err),
        Command::Train(a) => cmd_train(a, cli, out, err),
        Command::Predict(a) => cmd_predict(a, cli, out, err),
        Command::Bench(a) => bench::cmd_bench(a, cli, out, err),
        Command::Lab(a) => cmd_lab(a, cli, out, err),
    }
}

pub fn generate(g: Generator, n: usize, seed: u64) -> randsvm::Result<SparseDataset> {
    match g {
        Generator::Twonorm => gen_twonorm(n, seed),
        Generator::Ringnorm => gen_ringnorm(n, seed),
        Generator::Checkerboard => gen_checkerboard(n, seed),
        Generator::Friedman => gen_friedman_regression(n, seed),
    }
}

/// Runs `algo` and returns the report with the training wall time in seconds.
pub fn train_with(algo: Algo, ds: &SparseDataset, cfg: &TrainConfig) -> CliResult<(TrainReport, f64)> {
    let t0 = Instant::now();
    let report = match algo {
        Algo::Violator => train_violator_resampling(ds, cfg)?,
        Algo::Weighted => train_weighted_resampling(ds, cfg)?,
        Algo::Full => train_full(ds, cfg)?,
    };
    Ok((report, t0.elapsed().as_secs_f64()))
}

fn cmd_gen(a: &GenArgs, cli: &Cli, err: &mut dyn Write) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let ds = generate(a.dataset, a.n, cli.seed)?;
    save_libsvm(&ds, &a.out)?;
    if !cli.quiet {
        writeln!(err, "wrote {} {} examples to {}", ds.len(), a.dataset.name(), a.out.display())?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs, cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::from_opts(&a.model);
    settings.check_kernel()?;
    let ds = match (&a.data, a.gen) {
        (Some(path), _) => load_libsvm(path)?,
        (None, Some(g)) => {
            let n = a.n.ok_or_else(|| CliError::usage("--gen needs --n"))?;
            if n == 0 {
                return Err(CliError::usage("--n must be at least 1"));
            }
            generate(g, n, cli.seed)?
        }
        (None, None) => return Err(CliError::usage("one of --data or --gen is required")),
    };
    let cfg = settings.train_config(&ds, cli.seed)?;
    if !cli.quiet {
        writeln!(
            err,
            "training {} on {} examples: k={} r={}{}",
            a.algo.name(),
            ds.len(),
            cfg.plan.k,
            cfg.plan.r,
            if cfg.plan.clamped { " (clamped to n)" } else { "" }
        )?;
    }
    let (report, secs) = train_with(a.algo, &ds, &cfg)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.csv");
        p.into()
    });
    std::fs::write(&report_path, report.to_csv())?;
    if let Some(model) = &report.final_model {
        model.save(&a.out)?;
    }
    let last = report.iterations.last();
    writeln!(
        out,
        "termination={} iterations={} sv={} violators={} k={} r={} seconds={:.3}",
        report.termination,
        report.iterations.len(),
        last.map_or(0, |r| r.sv),
        last.map_or(0, |r| r.violators),
        cfg.plan.k,
        cfg.plan.r,
        secs
    )?;
    if report.termination == Termination::Degenerate {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "training is degenerate: no working set with both classes could be drawn"
        )));
    }
    Ok(())
}

/// Formats a prediction the way `predict` prints it.
pub fn format_prediction(model: &SvmModel, f: f64) -> String {
    match model.task {
        Task::Classify => (if f >= 0.0 { "+1" } else { "-1" }).to_string(),
        Task::Regress { .. } => format!("{f}"),
    }
}

fn cmd_predict(a: &PredictArgs, cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let model = SvmModel::load(&a.model)?;
    let ds = load_libsvm(&a.data)?;
    let values: Vec<f64> = ds.examples().iter().map(|x| predict(&model, x)).collect();
    let mut file;
    let sink: &mut dyn Write = match &a.out {
        Some(p) => {
            file = BufWriter::new(File::create(p)?);
            &mut file
        }
        None => out,
    };
    for &f in &values {
        writeln!(sink, "{}", format_prediction(&model, f))?;
    }
    sink.flush()?;
    if cli.quiet {
        return Ok(());
    }
    let printed: Vec<f64> = match model.task {
        Task::Classify => values.iter().map(|&f| if f >= 0.0 { 1.0 } else { -1.0 }).collect(),
        Task::Regress { .. } => values.clone(),
    };
    let rho = match metrics::pearson(&printed, ds.labels()) {
        Some(r) => r,
        None => {
            writeln!(err, "warning: predictions or labels are constant; rho reported as 0")?;
            0.0
        }
    };
    match model.task {
        Task::Classify => {
            writeln!(err, "accuracy={:.4}% rho={rho:.6}", metrics::sign_accuracy(&values, ds.labels()))?
        }
        Task::Regress { .. } => writeln!(err, "mse={:.6} rho={rho:.6}", metrics::mse(&values, ds.labels()))?,
    }
    Ok(())
}

fn cmd_lab(a: &LabArgs, cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let in_unit = |name: &str, v: f64| {
        if v > 0.0 && v < 1.0 {
            Ok(())
        } else {
            Err(CliError::usage(format!("--{name} must lie in (0, 1), got {v}")))
        }
    };
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let (name, summary) = match a.check {
        Check::Norm | Check::Dot => {
            in_unit("eps", a.eps)?;
            let k = a.k.unwrap_or(200);
            if a.d == 0 || k == 0 || (a.check == Check::Dot && a.d < 2) {
                return Err(CliError::usage("--d and --k must be positive (--d >= 2 for dot)"));
            }
            if a.check == Check::Norm {
                ("norm", check_norm_preservation(a.d, k, a.eps, a.trials, cli.seed)?)
            } else {
                ("dot", check_dot_preservation(a.d, k, a.eps, a.trials, cli.seed)?)
            }
        }
        Check::Margin => {
            in_unit("gamma", a.gamma)?;
            in_unit("delta", a.delta)?;
            let ds = match &a.data {
                Some(p) => load_libsvm(p)?,
                None => gen_separable(a.n, a.d, a.gap, cli.seed).map_err(|e| CliError::usage(e.to_string()))?,
            };
            let rep = match a.k {
                Some(k) => check_margin_preservation_with_k(&ds, a.gamma, a.delta, k, a.trials, cli.seed)?,
                None => check_margin_preservation(&ds, a.gamma, a.delta, a.trials, cli.seed)?,
            };
            if !cli.quiet {
                writeln!(err, "l*={:.6} L={:.6} k={}", rep.l_star, rep.max_norm, rep.k)?;
            }
            ("margin", rep.summary)
        }
    };
    writeln!(out, "check,trials,failures,rate,bound")?;
    writeln!(
        out,
        "{name},{},{},{:.6},{:.6}",
        summary.trials, summary.failures, summary.empirical_rate, summary.bound
    )?;
    Ok(())
}
