//! `bench`: train each algorithm on each seed and score it on held-out data.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};

use rayon::prelude::*;

use randsvm::dataset::{load_libsvm, SparseDataset};
use randsvm::model::{predict, Task};

use crate::args::{Algo, BenchArgs, Cli, Generator};
use crate::settings::Settings;
use crate::{generate, metrics, train_with, CliError, CliResult};

/// Defaults shipped with the binary, one section per data set.
pub const DEFAULT_CONFIG: &str = include_str!("../bench_defaults.toml");

pub const CSV_HEADER: &str = "dataset,algo,seed,trainN,seconds,accuracy_or_mse,rho";

const DEFAULT_TRAIN_N: usize = 20_000;
const DEFAULT_TEST_N: usize = 2_000;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub algo: Algo,
    pub seed: u64,
    pub train_n: usize,
    pub seconds: f64,
    /// Accuracy in percent for classification (and sign scoring), MSE for regression.
    pub score: f64,
    pub rho: f64,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6}",
            self.dataset,
            self.algo.name(),
            self.seed,
            self.train_n,
            self.seconds,
            self.score,
            self.rho
        )
    }

    pub fn parse(line: &str) -> Option<BenchRow> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return None;
        }
        let algo = match f[1] {
            "violator" => Algo::Violator,
            "weighted" => Algo::Weighted,
            "full" => Algo::Full,
            _ => return None,
        };
        Some(BenchRow {
            dataset: f[0].to_string(),
            algo,
            seed: f[2].parse().ok()?,
            train_n: f[3].parse().ok()?,
            seconds: f[4].parse().ok()?,
            score: f[5].parse().ok()?,
            rho: f[6].parse().ok()?,
        })
    }
}

/// Parses bench CSV output, skipping the header.
pub fn parse_csv(text: &str) -> Vec<BenchRow> {
    text.lines().filter(|l| *l != CSV_HEADER).filter_map(BenchRow::parse).collect()
}

/// Seed used for the test split of run `seed`.
pub fn test_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x7e57
}

pub fn load_config(text: &str) -> CliResult<BTreeMap<String, Settings>> {
    toml::from_str(text).map_err(|e| CliError::usage(format!("bad bench config: {e}")))
}

fn generator_for(name: &str, s: &Settings) -> CliResult<Generator> {
    if let Some(g) = s.generator {
        return Ok(g);
    }
    match name {
        "twonorm" => Ok(Generator::Twonorm),
        "ringnorm" => Ok(Generator::Ringnorm),
        "checkerboard" => Ok(Generator::Checkerboard),
        "friedman" => Ok(Generator::Friedman),
        _ => Err(CliError::usage(format!("section {name} names no generator"))),
    }
}

enum Source {
    Generated(Generator),
    Files(SparseDataset, SparseDataset),
}

fn score(task: Task, sign: bool, pred: &[f64], truth: &[f64]) -> (f64, f64) {
    let classify = task == Task::Classify;
    let printed: Vec<f64> = if classify {
        pred.iter().map(|&f| if f >= 0.0 { 1.0 } else { -1.0 }).collect()
    } else {
        pred.to_vec()
    };
    let rho = metrics::pearson(&printed, truth).unwrap_or(0.0);
    let s = if classify || sign { metrics::sign_accuracy(pred, truth) } else { metrics::mse(pred, truth) };
    (s, rho)
}

pub fn cmd_bench(a: &BenchArgs, cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let config = match &a.config {
        Some(p) => load_config(&std::fs::read_to_string(p)?)?,
        None => load_config(DEFAULT_CONFIG)?,
    };
    let is_file = a.dataset == "file";
    let section = match config.get(&a.dataset) {
        Some(s) => s.clone(),
        None if is_file => Settings::default(),
        None => return Err(CliError::usage(format!("no bench settings for data set {:?}", a.dataset))),
    };
    let flags = Settings {
        train_n: a.train_n,
        test_n: a.test_n,
        algos: a.algos.clone(),
        seeds: a.seeds.clone(),
        sign_accuracy: a.sign_accuracy.then_some(true),
        ..Settings::from_opts(&a.model)
    };
    let s = section.overlay(&flags);
    s.check_kernel()?;

    let source = if is_file {
        let (Some(tr), Some(te)) = (&a.train_file, &a.test_file) else {
            return Err(CliError::usage("--dataset file needs --train-file and --test-file"));
        };
        Source::Files(load_libsvm(tr)?, load_libsvm(te)?)
    } else {
        Source::Generated(generator_for(&a.dataset, &s)?)
    };
    let train_n = s.train_n.unwrap_or(DEFAULT_TRAIN_N);
    let test_n = s.test_n.unwrap_or(DEFAULT_TEST_N);
    if train_n == 0 || test_n == 0 {
        return Err(CliError::usage("--train-n and --test-n must be at least 1"));
    }
    let algos = s.algos.clone().unwrap_or_else(|| vec![Algo::Violator, Algo::Full]);
    let seeds = s.seeds.clone().unwrap_or_else(|| vec![cli.seed]);
    if algos.is_empty() || seeds.is_empty() {
        return Err(CliError::usage("--algos and --seeds must be nonempty"));
    }
    let sign = s.sign_accuracy.unwrap_or(false);

    let run_seed = |seed: u64| -> CliResult<Vec<BenchRow>> {
        let generated;
        let (train, test) = match &source {
            Source::Generated(g) => {
                generated = (generate(*g, train_n, seed)?, generate(*g, test_n, test_seed(seed))?);
                (&generated.0, &generated.1)
            }
            Source::Files(tr, te) => (tr, te),
        };
        let cfg = s.train_config(train, seed)?;
        let mut rows = Vec::with_capacity(algos.len());
        for &algo in &algos {
            let (report, seconds) = train_with(algo, train, &cfg)?;
            let model = report.final_model.as_ref().ok_or_else(|| {
                CliError::Runtime(anyhow::anyhow!("{} produced no model on seed {seed} ({})", algo.name(), report.termination))
            })?;
            let pred: Vec<f64> = test.examples().iter().map(|x| predict(model, x)).collect();
            let (score, rho) = score(cfg.task, sign, &pred, test.labels());
            rows.push(BenchRow { dataset: a.dataset.clone(), algo, seed, train_n: train.len(), seconds, score, rho });
        }
        Ok(rows)
    };
    let per_seed: Vec<CliResult<Vec<BenchRow>>> = if a.parallel_seeds {
        seeds.par_iter().map(|&sd| run_seed(sd)).collect()
    } else {
        seeds.iter().map(|&sd| run_seed(sd)).collect()
    };
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }

    let mut file;
    let sink: &mut dyn Write = match &a.out {
        Some(p) => {
            file = BufWriter::new(File::create(p)?);
            &mut file
        }
        None => out,
    };
    writeln!(sink, "{CSV_HEADER}")?;
    for r in &rows {
        writeln!(sink, "{}", r.to_csv())?;
    }
    sink.flush()?;

    if !cli.quiet {
        writeln!(err, "algo,runs,seconds_mean,seconds_std,score_mean,score_std,rho_mean,rho_std")?;
        for &algo in &algos {
            let pick = |f: fn(&BenchRow) -> f64| -> Vec<f64> { rows.iter().filter(|r| r.algo == algo).map(f).collect() };
            let (tm, ts) = metrics::mean_std(&pick(|r| r.seconds));
            let (sm, ss) = metrics::mean_std(&pick(|r| r.score));
            let (rm, rs) = metrics::mean_std(&pick(|r| r.rho));
            writeln!(err, "{},{},{tm:.6},{ts:.6},{sm:.6},{ss:.6},{rm:.6},{rs:.6}", algo.name(), seeds.len())?;
        }
    }
    Ok(())
}
