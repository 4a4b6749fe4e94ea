//! End-to-end acceptance checks. Everything runs inside one test so the
//! timed criteria never share the CPU with each other; each criterion prints
//! a single PASS/FAIL line.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use randsvm::bounds::{estimate_k_from_eps, estimate_k_nonsep, make_plan, PlanKind, PlanParams};
use randsvm::dataset::{gen_almost_separable, gen_separable, stats, LabelKind, SparseDataset, SparseVec};
use randsvm::kernels::KernelSpec;
use randsvm::lab::{check_dot_preservation, check_margin_preservation};
use randsvm::model::Task;
use randsvm::oracle::{build_dual, solve_dense};
use randsvm::smo::solve_task;
use randsvm::train::{kkt_violators, train_full, train_violator_resampling, train_weighted_resampling, TrainConfig, Termination};
use randsvm_cli::bench::{parse_csv, BenchRow};
use randsvm_cli::metrics::median;

type Outcome = (bool, String);
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn bench(args: &[&str]) -> Vec<BenchRow> {
    let mut argv = vec!["randsvm", "--quiet", "bench"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = randsvm_cli::run(argv, &mut out, &mut err);
    assert_eq!(code, 0, "bench failed: {}", String::from_utf8_lossy(&err));
    parse_csv(&String::from_utf8(out).unwrap())
}

fn rows_for(rows: &[BenchRow], algo: &str) -> Vec<BenchRow> {
    rows.iter().filter(|r| r.algo.name() == algo).cloned().collect()
}

fn random_instance(rng: &mut ChaCha8Rng, task_classify: bool, gaussian: bool, c: f64) -> (SparseDataset, Task, KernelSpec, f64) {
    let n = rng.random_range(8..=60);
    let d = rng.random_range(2..=6);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let kernel = if gaussian { KernelSpec::Gaussian { sigma: rng.random_range(0.4..2.0) } } else { KernelSpec::Linear };
    let examples: Vec<SparseVec> = xs.iter().map(|v| SparseVec::from_dense(v)).collect();
    if task_classify {
        let mut ys: Vec<f64> =
            xs.iter().map(|v| if v[0] - 0.5 * v[1] + rng.random_range(-0.4..0.4) > 0.0 { 1.0 } else { -1.0 }).collect();
        ys[0] = 1.0;
        ys[1] = -1.0;
        (SparseDataset::new(examples, ys, LabelKind::Binary).unwrap(), Task::Classify, kernel, c)
    } else {
        let ys: Vec<f64> = xs.iter().map(|v| 1.5 * v[0] - v[1] * v[1] + rng.random_range(-0.2..0.2)).collect();
        let eps = rng.random_range(0.0..0.3);
        (SparseDataset::new(examples, ys, LabelKind::Real).unwrap(), Task::Regress { epsilon: eps }, kernel, c)
    }
}

fn c1_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut count = 0;
    for i in 0..100 {
        let c = [0.1, 1.0, 100.0][i % 3];
        let (ds, task, kernel, c) = random_instance(&mut rng, i % 2 == 0, (i / 2) % 2 == 0, c);
        let working: Vec<usize> = (0..ds.len()).collect();
        let smo = solve_task(&ds, &working, task, &kernel, c, None, 1e-8).unwrap();
        let qp = build_dual(&ds, &working, &kernel, c, task).unwrap();
        let (_, oracle) = solve_dense(&qp, 1e-9).unwrap();
        worst = worst.max((smo.dual_objective - oracle).abs() / oracle.abs().max(1e-12));
        count += 1;
    }
    (worst <= 1e-5, format!("{count} instances, worst relative gap {worst:.2e} (limit 1e-5)"))
}

fn linear_cfg(ds: &SparseDataset, k: usize, c: f64, seed: u64) -> TrainConfig {
    let params = PlanParams { k_override: Some(k), ..Default::default() };
    let plan = make_plan(PlanKind::Separable, &stats(ds).unwrap(), &params).unwrap();
    let mut cfg = TrainConfig::new(plan, Task::Classify, c, KernelSpec::Linear);
    cfg.kkt_tol = 1e-5;
    cfg.viol_tol = 1e-3;
    cfg.seed = seed;
    cfg
}

fn c2_zero_violators_is_optimal() -> Outcome {
    let mut reached = [0usize; 2];
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (family, count) in reached.iter_mut().enumerate() {
        for s in 0..20u64 {
            let n = 200 + 15 * s as usize;
            let ds = if family == 0 {
                gen_separable(n, 5, 0.3, s).unwrap()
            } else {
                gen_almost_separable(n, 5, 0.3, 0.02, s).unwrap()
            };
            let cfg = linear_cfg(&ds, 60, 2.0, s);
            let rep = train_violator_resampling(&ds, &cfg).unwrap();
            if rep.termination != Termination::NoViolators {
                continue;
            }
            *count += 1;
            let full = train_full(&ds, &cfg).unwrap().final_objective().unwrap();
            let got = rep.final_objective().unwrap();
            let rel = (got - full).abs() / full.abs().max(1e-12);
            worst = worst.max(rel);
            let model = rep.final_model.as_ref().unwrap();
            let viol = kkt_violators(model, &ds, cfg.viol_tol).len();
            if rel > 1e-3 || viol != 0 {
                bad.push(format!("family {family} seed {s}: rel {rel:.2e}, {viol} violators"));
            }
        }
    }
    // The claim is vacuous unless most runs actually reach zero violators.
    let ok = bad.is_empty() && reached.iter().all(|&r| r >= 10);
    (
        ok,
        format!(
            "noViolators on {}/20 separable and {}/20 almost-separable, worst relative gap {worst:.2e}{}",
            reached[0],
            reached[1],
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn c3_projection_distortion() -> Outcome {
    let norm = randsvm::lab::check_norm_preservation(1000, 200, 0.3, 10_000, 3).unwrap();
    let dot = check_dot_preservation(1000, 200, 0.3, 10_000, 4).unwrap();
    (
        norm.within_bound() && dot.within_bound(),
        format!(
            "norm rate {:.4} vs {:.4}, dot rate {:.4} vs {:.4}",
            norm.empirical_rate,
            norm.threshold(),
            dot.empirical_rate,
            dot.threshold()
        ),
    )
}

fn c4_margin_preservation() -> Outcome {
    let ds = gen_separable(300, 50, 0.6, 7).unwrap();
    let rep = check_margin_preservation(&ds, 0.5, 0.5, 200, 7).unwrap();
    let rate = rep.summary.failures as f64 / rep.summary.trials as f64;
    (
        rep.summary.trials == 200 && rate <= 0.5,
        format!("k={} l*={:.4} L={:.4}: {} of 200 trials below l*(1-γ), rate {rate:.3} (limit 0.5)", rep.k, rep.l_star, rep.max_norm, rep.summary.failures),
    )
}

fn c5_twonorm() -> Outcome {
    let rows = bench(&["--dataset", "twonorm", "--train-n", "20000", "--test-n", "2000", "--seeds", "1,2,3", "--algos", "violator,full"]);
    let (v, f) = (rows_for(&rows, "violator"), rows_for(&rows, "full"));
    let gaps: Vec<f64> = f.iter().zip(&v).map(|(f, v)| f.score - v.score).collect();
    let ok = v.len() == 3 && f.len() == 3 && gaps.iter().all(|g| *g <= 2.5);
    let acc: Vec<String> = v.iter().zip(&f).map(|(v, f)| format!("{:.2}/{:.2}", v.score, f.score)).collect();
    (ok, format!("violator/full accuracy per seed {}", acc.join(", ")))
}

fn c6_checkerboard() -> Outcome {
    let rows = bench(&["--dataset", "checkerboard", "--train-n", "20000", "--test-n", "2000", "--seeds", "1,2,3", "--algos", "violator"]);
    let acc: Vec<f64> = rows.iter().map(|r| r.score).collect();
    (acc.len() == 3 && acc.iter().all(|a| *a >= 90.0), format!("violator accuracy {acc:.2?} (limit 90)"))
}

fn c7_friedman() -> Outcome {
    let rows = bench(&["--dataset", "friedman", "--train-n", "10000", "--test-n", "2000", "--seeds", "1,2,3", "--algos", "violator,full"]);
    let (v, f) = (rows_for(&rows, "violator"), rows_for(&rows, "full"));
    let ok = v.len() == 3
        && f.len() == 3
        && v.iter().zip(&f).all(|(v, f)| v.rho >= 0.90 && v.score <= 1.25 * f.score);
    let detail: Vec<String> =
        v.iter().zip(&f).map(|(v, f)| format!("rho {:.4} mse {:.3}/{:.3}", v.rho, v.score, f.score)).collect();
    (ok, detail.join(", "))
}

fn c8_scaling() -> Outcome {
    let time_at = |n: &str| -> Vec<f64> {
        bench(&["--dataset", "twonorm", "--train-n", n, "--test-n", "200", "--seeds", "1,2,3", "--algos", "violator"])
            .iter()
            .map(|r| r.seconds)
            .collect()
    };
    let small = median(&time_at("10000"));
    let large = median(&time_at("40000"));
    (large < 4.0 * small, format!("median seconds {small:.3} at 10000, {large:.3} at 40000, ratio {:.2} (limit 4)", large / small))
}

fn c9_k_formulas() -> Outcome {
    let eps_value = estimate_k_from_eps(0.2, 0.9, 700_000).unwrap();
    let nonsep_value = estimate_k_nonsep(0.2, 0.1, 100_000).unwrap();
    let mut ok = eps_value == 5981 && nonsep_value == 12162;
    let ns = [1_000usize, 10_000, 100_000, 1_000_000];
    let epss = [0.1, 0.2, 0.3, 0.5];
    let deltas = [0.1, 0.5, 0.9];
    let mut checked = 0;
    for (a, &n) in ns.iter().enumerate() {
        for (b, &e) in epss.iter().enumerate() {
            for (c, &d) in deltas.iter().enumerate() {
                let k = estimate_k_from_eps(e, d, n).unwrap();
                let kn = estimate_k_nonsep(e, d, n).unwrap();
                let direct = (16.0 / (e * e) * (4.0 * n as f64 / d).ln()).ceil() as usize;
                ok &= k == direct && kn >= k;
                if a + 1 < ns.len() {
                    ok &= estimate_k_from_eps(e, d, ns[a + 1]).unwrap() >= k;
                    ok &= estimate_k_nonsep(e, d, ns[a + 1]).unwrap() >= kn;
                }
                if b + 1 < epss.len() {
                    ok &= estimate_k_from_eps(epss[b + 1], d, n).unwrap() <= k;
                    ok &= estimate_k_nonsep(epss[b + 1], d, n).unwrap() <= kn;
                }
                if c + 1 < deltas.len() {
                    ok &= estimate_k_from_eps(e, deltas[c + 1], n).unwrap() <= k;
                    ok &= estimate_k_nonsep(e, deltas[c + 1], n).unwrap() <= kn;
                }
                checked += 1;
            }
        }
    }
    (ok, format!("from_eps={eps_value} nonsep={nonsep_value}, {checked} grid points monotone"))
}

fn c10_weighted_termination() -> Outcome {
    let mut reached = 0;
    let mut doublings = 0;
    let mut iters = Vec::new();
    for s in 0..20u64 {
        let ds = gen_separable(300, 5, 0.3, 100 + s).unwrap();
        let cfg = linear_cfg(&ds, 5, 2.0, s);
        let rep = train_weighted_resampling(&ds, &cfg).unwrap();
        if rep.termination == Termination::NoViolators && rep.iterations.len() <= cfg.max_outer_iters {
            reached += 1;
        }
        doublings += rep.doublings();
        iters.push(rep.iterations.len());
    }
    (
        reached >= 19 && doublings >= 1,
        format!("v=0 on {reached}/20 seeds (limit 19), {doublings} weight doublings, rounds {iters:?}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", Duration::from_secs(60), c1_oracle_equivalence),
        ("zero violators means optimal", Duration::from_secs(300), c2_zero_violators_is_optimal),
        ("projection distortion rates", Duration::from_secs(120), c3_projection_distortion),
        ("margin preservation", Duration::from_secs(300), c4_margin_preservation),
        ("twonorm accuracy vs full", Duration::from_secs(600), c5_twonorm),
        ("checkerboard accuracy", Duration::from_secs(600), c6_checkerboard),
        ("friedman regression", Duration::from_secs(600), c7_friedman),
        ("training time scaling", Duration::from_secs(600), c8_scaling),
        ("k formulas", Duration::from_secs(60), c9_k_formulas),
        ("weighted resampling termination", Duration::from_secs(300), c10_weighted_termination),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = f();
        let took = t0.elapsed();
        let ok = ok && took < *limit;
        println!(
            "{} [{}] {name}: {detail} ({:.1}s, limit {}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            limit.as_secs()
        );
        if !ok {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
