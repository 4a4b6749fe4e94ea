use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "randsvm", version, about = "Randomized working-set SVM training")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Suppress progress and summary output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic data set in libsvm format.
    Gen(GenArgs),
    /// Train a model and write it with a per-iteration report.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Time and score training algorithms over several seeds.
    Bench(BenchArgs),
    /// Monte-Carlo checks of random-projection distortion.
    Lab(LabArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Twonorm,
    Ringnorm,
    Checkerboard,
    Friedman,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Twonorm => "twonorm",
            Generator::Ringnorm => "ringnorm",
            Generator::Checkerboard => "checkerboard",
            Generator::Friedman => "friedman",
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub dataset: Generator,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Linear,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Violator,
    Weighted,
    Full,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Violator => "violator",
            Algo::Weighted => "weighted",
            Algo::Full => "full",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Classify,
    Regress,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanArg {
    Separable,
    Nonseparable,
    Regression,
}

/// Kernel, cost and sample-size settings shared by `train` and `bench`.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelOpts {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Gaussian width: k(x,z) = exp(-|x-z|²/(2 sigma²)).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "C")]
    pub c: Option<f64>,
    /// Defaults to regress for real-valued labels, classify otherwise.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Half-width of the regression tube.
    #[arg(long)]
    pub tube_eps: Option<f64>,
    #[arg(long, value_enum)]
    pub plan: Option<PlanArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eps_jl: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Use kappa = ln(n)/n unless --kappa is given.
    #[arg(long)]
    pub almost_separable: bool,
    #[arg(long)]
    pub margin_lb: Option<f64>,
    /// Bound on the norm of the regression weight vector.
    #[arg(long)]
    pub w_norm: Option<f64>,
    #[arg(long)]
    pub c_mult: Option<f64>,
    /// Use this k instead of any formula.
    #[arg(long)]
    pub k_override: Option<usize>,
    #[arg(long)]
    pub kkt_tol: Option<f64>,
    #[arg(long)]
    pub viol_tol: Option<f64>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training data in libsvm format.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    pub data: Option<PathBuf>,
    /// Generate the training data instead of reading it.
    #[arg(long, value_enum, requires = "n")]
    pub gen: Option<Generator>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "violator")]
    pub algo: Algo,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Model output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Report CSV path; defaults to `<out>.report.csv`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Prediction output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Bench settings file; the shipped defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Section of the settings file, or `file` with --train-file/--test-file.
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub train_file: Option<PathBuf>,
    #[arg(long)]
    pub test_file: Option<PathBuf>,
    #[arg(long)]
    pub train_n: Option<usize>,
    #[arg(long)]
    pub test_n: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algos: Option<Vec<Algo>>,
    /// Comma-separated seeds; defaults to the global --seed alone.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Run seeds concurrently. Rows are still emitted in seed order.
    #[arg(long)]
    pub parallel_seeds: bool,
    /// Score a regression model by the sign of its predictions.
    #[arg(long)]
    pub sign_accuracy: bool,
    #[command(flatten)]
    pub model: ModelOpts,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Norm,
    Dot,
    Margin,
}

#[derive(Args, Debug)]
pub struct LabArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    #[arg(long, default_value_t = 1000)]
    pub d: usize,
    /// Target dimension. The margin check derives it from gamma and delta
    /// when absent.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Margin check: separable points to generate.
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// Margin check: hard-margin gap of the generated points.
    #[arg(long, default_value_t = 0.6)]
    pub gap: f64,
    /// Margin check: read the points from a libsvm file instead.
    #[arg(long)]
    pub data: Option<PathBuf>,
}
