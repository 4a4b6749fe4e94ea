use std::path::Path;

use randsvm::dataset::{gen_friedman_regression, gen_twonorm, load_libsvm, save_libsvm, LabelKind, SparseDataset, SparseVec};
use randsvm::kernels::KernelSpec;
use randsvm::model::{predict, SvmModel, Task};
use randsvm::train::train_violator_resampling;
use randsvm_cli::bench::{parse_csv, CSV_HEADER};
use randsvm_cli::settings::Settings;
use randsvm_cli::{run, CliError};

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Out {
    let mut o = Vec::new();
    let mut e = Vec::new();
    let mut argv = vec!["randsvm"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut o, &mut e);
    Out { code, stdout: String::from_utf8(o).unwrap(), stderr: String::from_utf8(e).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.model");
    let r = cli(&["train", "--gen", "twonorm", "--n", "100", "--kernel", "gaussian", "--out", p(&m)]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("sigma"));
    assert!(!m.exists());
    assert_eq!(cli(&["train", "--gen", "twonorm", "--out", p(&m)]).code, 2);
    assert_eq!(cli(&["frobnicate"]).code, 2);
    assert_eq!(cli(&["train", "--gen", "twonorm", "--n", "100", "--C", "-1", "--out", p(&m)]).code, 2);
    assert_eq!(cli(&["train", "--gen", "friedman", "--n", "100", "--task", "classify", "--out", p(&m)]).code, 2);
    assert_eq!(cli(&["lab", "--check", "norm", "--eps", "1.5"]).code, 2);
    assert_eq!(cli(&["bench", "--dataset", "nosuch"]).code, 2);
    assert_eq!(cli(&["bench", "--dataset", "file"]).code, 2);
    assert_eq!(cli(&["--help"]).code, 0);
}

#[test]
fn unreadable_files_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.txt");
    let r = cli(&["predict", "--model", p(&missing), "--data", p(&missing)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error:"));
    let m = dir.path().join("m.model");
    assert_eq!(cli(&["train", "--data", p(&missing), "--out", p(&m)]).code, 1);
}

#[test]
fn gen_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("c.txt");
    let r = cli(&["--seed", "4", "gen", "--dataset", "checkerboard", "--n", "50", "--out", p(&f)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let ds = load_libsvm(&f).unwrap();
    assert_eq!(ds.len(), 50);
    assert_eq!(ds.labels(), randsvm::dataset::gen_checkerboard(50, 4).unwrap().labels());
}

#[test]
fn train_save_load_predict_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    let test = dir.path().join("test.txt");
    let ds = gen_friedman_regression(400, 11).unwrap();
    save_libsvm(&ds, &train).unwrap();
    save_libsvm(&gen_friedman_regression(100, 12).unwrap(), &test).unwrap();
    let model_path = dir.path().join("f.model");
    let args = ["--kernel", "gaussian", "--sigma", "1", "--C", "10", "--tube-eps", "0.5", "--k-override", "60"];
    let mut train_args = vec!["--seed", "5", "train", "--data", p(&train), "--out", p(&model_path)];
    train_args.extend_from_slice(&args);
    let r = cli(&train_args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("termination="));
    assert!(r.stdout.contains(" k=60 r=120 "));
    let report = std::fs::read_to_string(dir.path().join("f.model.report.csv")).unwrap();
    assert!(report.starts_with("iter,working,sv,violators,objective,ms\n"));

    // Same flags in-process give the same model.
    let loaded_train = load_libsvm(&train).unwrap();
    let s = Settings {
        kernel: Some(randsvm_cli::args::KernelArg::Gaussian),
        sigma: Some(1.0),
        c: Some(10.0),
        tube_eps: Some(0.5),
        k_override: Some(60),
        ..Default::default()
    };
    let cfg = s.train_config(&loaded_train, 5).unwrap();
    let in_memory = train_violator_resampling(&loaded_train, &cfg).unwrap().final_model.unwrap();
    let loaded = SvmModel::load(&model_path).unwrap();
    assert_eq!(loaded, in_memory);

    let r = cli(&["predict", "--model", p(&model_path), "--data", p(&test)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let test_ds = load_libsvm(&test).unwrap();
    let printed: Vec<f64> = r.stdout.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(printed.len(), test_ds.len());
    for (x, f) in test_ds.examples().iter().zip(&printed) {
        assert_eq!(predict(&in_memory, x).to_bits(), f.to_bits());
    }
    assert!(r.stderr.starts_with("mse="));
}

#[test]
fn predict_linear_signs() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = SvmModel::constant(Task::Classify, KernelSpec::Linear, 1.0, 0.0);
    model.sv_indices = vec![0];
    model.dual_coef = vec![1.0];
    model.sv_vectors = vec![SparseVec::from_dense(&[1.0])];
    let mp = dir.path().join("w.model");
    model.save(&mp).unwrap();
    let data = dir.path().join("d.txt");
    let ds = SparseDataset::new(
        vec![SparseVec::from_dense(&[2.0]), SparseVec::from_dense(&[-2.0])],
        vec![1.0, -1.0],
        LabelKind::Binary,
    )
    .unwrap();
    save_libsvm(&ds, &data).unwrap();
    let r = cli(&["predict", "--model", p(&mp), "--data", p(&data)]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, "+1\n-1\n");
    assert!(r.stderr.contains("accuracy=100.0000%"));
    assert!(r.stderr.contains("rho=1.000000"));
}

#[test]
fn predict_constant_regression() {
    let dir = tempfile::tempdir().unwrap();
    let model = SvmModel::constant(Task::Regress { epsilon: 0.1 }, KernelSpec::Linear, 1.0, 3.0);
    let mp = dir.path().join("c.model");
    model.save(&mp).unwrap();
    let data = dir.path().join("d.txt");
    let y = [1.0, 2.0, 6.0, 3.5];
    let ds = SparseDataset::new(
        y.iter().map(|&v| SparseVec::from_dense(&[v])).collect(),
        y.to_vec(),
        LabelKind::Real,
    )
    .unwrap();
    save_libsvm(&ds, &data).unwrap();
    let out = dir.path().join("pred.txt");
    let r = cli(&["predict", "--model", p(&mp), "--data", p(&data), "--out", p(&out)]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty());
    let lines: Vec<f64> = std::fs::read_to_string(&out).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(lines, vec![3.0; 4]);
    let expect = y.iter().map(|v| (v - 3.0) * (v - 3.0)).sum::<f64>() / 4.0;
    assert!(r.stderr.contains("warning"));
    assert!(r.stderr.contains(&format!("mse={expect:.6} rho=0.000000")), "{}", r.stderr);
}

#[test]
fn k_override_reaches_plan() {
    let ds = gen_twonorm(300, 0).unwrap();
    let s = Settings { k_override: Some(50), ..Default::default() };
    assert_eq!(s.train_config(&ds, 0).unwrap().plan.k, 50);
    let s = Settings { kernel: Some(randsvm_cli::args::KernelArg::Gaussian), ..Default::default() };
    assert!(matches!(s.train_config(&ds, 0), Err(CliError::Usage(_))));
}

#[test]
fn lab_output_format() {
    let r = cli(&["--seed", "2", "lab", "--check", "norm", "--d", "100", "--k", "50", "--trials", "200"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "check,trials,failures,rate,bound");
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((f[0], f[1]), ("norm", "200"));
    let failures: f64 = f[2].parse().unwrap();
    let rate: f64 = f[3].parse().unwrap();
    assert!((rate - failures / 200.0).abs() < 1e-6);
    let again = cli(&["--seed", "2", "lab", "--check", "norm", "--d", "100", "--k", "50", "--trials", "200"]);
    assert_eq!(again.stdout, r.stdout);
}

#[test]
fn bench_single_seed_has_zero_std() {
    let r = cli(&["--seed", "3", "bench", "--dataset", "twonorm", "--train-n", "300", "--test-n", "100", "--algos", "violator,full"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with(CSV_HEADER));
    let rows = parse_csv(&r.stdout);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|row| row.seed == 3 && row.train_n == 300));
    let agg: Vec<&str> = r.stderr.lines().skip(1).collect();
    assert_eq!(agg.len(), 2);
    for line in agg {
        let f: Vec<&str> = line.split(',').collect();
        for i in [3, 5, 7] {
            assert_eq!(f[i].parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
}

#[test]
fn parallel_seeds_match_sequential() {
    let base = ["bench", "--dataset", "checkerboard", "--train-n", "300", "--test-n", "100", "--seeds", "1,2,3", "--algos", "violator,weighted"];
    let seq = cli(&base);
    let mut par_args = base.to_vec();
    par_args.push("--parallel-seeds");
    let par = cli(&par_args);
    assert_eq!((seq.code, par.code), (0, 0), "{}", seq.stderr);
    let strip = |rows: Vec<randsvm_cli::bench::BenchRow>| -> Vec<_> {
        rows.into_iter().map(|r| (r.algo, r.seed, r.score.to_bits(), r.rho.to_bits())).collect()
    };
    let (a, b) = (parse_csv(&seq.stdout), parse_csv(&par.stdout));
    assert_eq!(a.len(), 6);
    assert_eq!(strip(a), strip(b));
}

#[test]
fn bench_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let tr = dir.path().join("tr.txt");
    let te = dir.path().join("te.txt");
    save_libsvm(&gen_friedman_regression(200, 1).unwrap(), &tr).unwrap();
    save_libsvm(&gen_friedman_regression(50, 2).unwrap(), &te).unwrap();
    let r = cli(&[
        "--quiet", "bench", "--dataset", "file", "--train-file", p(&tr), "--test-file", p(&te), "--algos", "full",
        "--kernel", "gaussian", "--sigma", "1", "--C", "10",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.is_empty());
    let rows = parse_csv(&r.stdout);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].score > 0.0 && rows[0].rho > 0.8, "{:?}", rows[0]);
}
