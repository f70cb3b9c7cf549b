//! Acceptance suite: one test per numbered criterion, each printing a
//! pass/fail line (run with `--nocapture` to see them). Criteria 6 and 7
//! need MNIST IDX files on disk and are skipped, not failed, when absent
//! (point `MNIST_DIR` at a directory holding train-images-idx3-ubyte and
//! train-labels-idx1-ubyte).

mod common;

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use common::{
    fd_gradient, fd_jacobian_apply, norm, pooled_ridge_minimizer, seeded_rng, spd_with_spectrum,
    sub, Dense,
};
use fed_newton::datasets::{generate_synthetic, load_idx, partition_by_label, SyntheticSpec};
use fed_newton::experiment::{
    parse_config, rounds_to_target, run_experiment, Algo, DatasetSpec, RunConfig, StepSizeSpec,
};
use fed_newton::federation::run;
use fed_newton::glm::{GlmFamily, GlmModel, Sample};
use fed_newton::richardson::{richardson_solve, spectral_alpha, RichardsonSettings};
use fed_newton::trace::ValMetric;
use fed_newton::ParamVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn pass(criterion: u32, detail: &str) {
    println!("criterion {criterion}: PASS - {detail}");
}

fn budget(criterion: u32, started: Instant, seconds: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < seconds,
        "criterion {criterion}: runtime {elapsed:.1}s exceeds the {seconds}s budget"
    );
}

fn random_shard(rng: &mut ChaCha8Rng, family: GlmFamily, dim: usize, count: usize) -> Vec<Sample> {
    (0..count)
        .map(|_| {
            let features: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let label = match family {
                GlmFamily::Ridge => rng.random::<f64>() * 4.0 - 2.0,
                GlmFamily::BinaryLogistic => {
                    if rng.random::<f64>() < 0.5 {
                        -1.0
                    } else {
                        1.0
                    }
                }
                GlmFamily::MultinomialLogistic { classes } => rng.random_range(0..classes) as f64,
            };
            Sample::new(features, label)
        })
        .collect()
}

#[test]
fn c01_numerical_kernels_match_finite_differences() {
    let started = Instant::now();
    let families = [
        (GlmFamily::Ridge, 0.3),
        (GlmFamily::BinaryLogistic, 0.05),
        (GlmFamily::MultinomialLogistic { classes: 3 }, 0.1),
    ];
    for instance in 0..50 {
        let mut rng = seeded_rng(91_000 + instance);
        let dim = rng.random_range(2..=10usize);
        let count = rng.random_range(1..=20usize);
        for (family, lambda) in families {
            let model = GlmModel::new(family, lambda, dim).unwrap();
            let shard = random_shard(&mut rng, family, dim, count);
            let w: ParamVector =
                (0..model.param_len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: ParamVector =
                (0..model.param_len()).map(|_| rng.random::<f64>() - 0.5).collect();

            let grad = model.gradient(&shard, &w).unwrap();
            let loss_fn =
                |x: &[f64]| model.loss(&shard, &ParamVector::new(x.to_vec())).unwrap();
            let fd_grad = fd_gradient(&loss_fn, w.as_slice(), 1e-6);
            let gerr = norm(&sub(grad.as_slice(), &fd_grad)) / norm(grad.as_slice()).max(1.0);
            assert!(
                gerr <= 1e-5,
                "criterion 1: instance {instance} {family:?} gradient error {gerr}"
            );

            let hv = model.hvp(&shard, &w, &v).unwrap();
            let grad_fn = |x: &[f64]| {
                model
                    .gradient(&shard, &ParamVector::new(x.to_vec()))
                    .unwrap()
                    .into_vec()
            };
            let fd_hv = fd_jacobian_apply(&grad_fn, w.as_slice(), v.as_slice(), 1e-6);
            let herr = norm(&sub(hv.as_slice(), &fd_hv)) / norm(&fd_hv).max(1.0);
            assert!(
                herr <= 1e-4,
                "criterion 1: instance {instance} {family:?} hvp error {herr}"
            );
        }
    }
    budget(1, started, 5.0);
    pass(1, "gradients within 1e-5 and HVPs within 1e-4 of finite differences, 50 instances x 3 families");
}

#[test]
fn c02_richardson_error_bound_and_divergence_detection() {
    let started = Instant::now();
    for instance in 0..100 {
        let mut rng = seeded_rng(92_000 + instance);
        let dim = rng.random_range(2..=8usize);
        let eigs: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.5 + 0.5).collect();
        let lambda_max = eigs.iter().cloned().fold(0.0, f64::max);
        let lambda_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let a = spd_with_spectrum(&eigs, &mut rng);
        let b: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let x_star = a.solve(&b);

        let alpha = 1.0 / lambda_max;
        let contraction = (1.0 - alpha * lambda_min).max(0.0);
        for rounds in [1usize, 4, 16] {
            let settings = RichardsonSettings::new(alpha, rounds).unwrap();
            let x = richardson_solve(a.apply(), &ParamVector::new(b.clone()), &settings).unwrap();
            let err = norm(&sub(x.as_slice(), &x_star));
            let bound = contraction.powi(rounds as i32) * norm(&x_star) + 1e-10;
            assert!(
                err <= bound,
                "criterion 2: instance {instance} rounds {rounds}: {err} > {bound}"
            );
        }

        let settings = RichardsonSettings::new(3.0 / lambda_max, 100_000).unwrap();
        let diverged = richardson_solve(a.apply(), &ParamVector::new(b), &settings);
        assert!(
            matches!(diverged, Err(fed_newton::Error::RichardsonDiverged { .. })),
            "criterion 2: instance {instance} should diverge for alpha > 2/lambda_max"
        );
    }
    budget(2, started, 5.0);
    pass(2, "dense-oracle error bound held on 100 systems; divergence detected past 2/lambda_max");
}

fn recursion_oracle(a: &Dense, b: &[f64], alpha: f64, rounds: usize) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for _ in 0..rounds {
        let ax = a.matvec(&x);
        for i in 0..x.len() {
            x[i] = x[i] - alpha * ax[i] + alpha * b[i];
        }
    }
    x
}

fn averaging_gaps(mats: &[Dense], b: &[f64], lambda_max_hat: f64, ks: &[usize]) -> Vec<f64> {
    let mut avg_mat = Dense::zeros(mats[0].n);
    for m in mats {
        avg_mat.add_assign(m, 1.0 / mats.len() as f64);
    }
    ks.iter()
        .map(|&k| {
            let alpha = spectral_alpha(lambda_max_hat, k).unwrap();
            let centralized = recursion_oracle(&avg_mat, b, alpha, k);
            let mut averaged = vec![0.0; b.len()];
            for m in mats {
                let x = recursion_oracle(m, b, alpha, k);
                for (a, xi) in averaged.iter_mut().zip(x.iter()) {
                    *a += xi / mats.len() as f64;
                }
            }
            norm(&sub(&averaged, &centralized))
        })
        .collect()
}

#[test]
fn c03_distributed_averaging_gap_halves_when_rounds_double() {
    let started = Instant::now();

    // homogeneous degeneracy: identical matrices agree bitwise
    {
        let mut rng = seeded_rng(93_999);
        let a = spd_with_spectrum(&[2.5, 1.2, 0.7], &mut rng);
        let b = ParamVector::new(vec![1.0, -0.5, 0.25]);
        let settings = RichardsonSettings::new(spectral_alpha(2.5, 16).unwrap(), 16).unwrap();
        let x1 = richardson_solve(a.apply(), &b, &settings).unwrap();
        let x2 = richardson_solve(a.apply(), &b, &settings).unwrap();
        let centralized = richardson_solve(a.apply(), &b, &settings).unwrap();
        for ((u, v), c) in x1.iter().zip(x2.iter()).zip(centralized.iter()) {
            assert_eq!(
                ((u + v) / 2.0).to_bits(),
                c.to_bits(),
                "criterion 3: homogeneous case must agree bitwise"
            );
        }
    }

    let ks = [8usize, 16, 32];
    let mut failures: Vec<String> = Vec::new();

    // fixed instance
    let fixed = [Dense::from_diag(&[3.0, 1.0]), Dense::from_diag(&[1.0, 3.0])];
    let gaps = averaging_gaps(&fixed, &[2.0, 2.0], 3.0, &ks);
    for pair in gaps.windows(2) {
        let ratio = pair[1] / pair[0];
        if ratio > 0.5 {
            failures.push(format!("fixed instance: gaps {gaps:?}, ratio {ratio:.4}"));
            break;
        }
    }

    // 20 random two-worker instances
    for instance in 0..20 {
        let mut rng = seeded_rng(93_000 + instance);
        let dim = rng.random_range(2..=8usize);
        let eigs1: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 0.5).collect();
        let eigs2: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 2.0).collect();
        let lambda_max_hat = eigs1.iter().chain(eigs2.iter()).cloned().fold(0.0, f64::max);
        let mats = [
            spd_with_spectrum(&eigs1, &mut rng),
            spd_with_spectrum(&eigs2, &mut rng),
        ];
        let b: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 0.5).collect();
        let gaps = averaging_gaps(&mats, &b, lambda_max_hat, &ks);
        for pair in gaps.windows(2) {
            let ratio = pair[1] / pair[0];
            if ratio > 0.5 {
                failures.push(format!("instance {instance}: gaps {gaps:?}, ratio {ratio:.4}"));
                break;
            }
        }
    }

    budget(3, started, 5.0);
    if failures.is_empty() {
        pass(3, "averaged-vs-centralized gap halved per doubling on every instance; homogeneous case bitwise");
        return;
    }
    println!(
        "criterion 3: FAIL - the gap does not halve as k doubles under alpha = min(1/k, 1/lambda_max_hat); \
         it saturates at a heterogeneity-dependent constant ({} of 21 instances violate the ratio; \
         first: {})",
        failures.len(),
        failures[0]
    );
    panic!(
        "criterion 3 ratio subclaim failed as measured by the brute-force recursion oracle: {}",
        failures.join(" | ")
    );
}

fn base_synth_config(out: PathBuf) -> RunConfig {
    RunConfig {
        algo: Algo::Done,
        dataset: DatasetSpec::Synthetic {
            dim: 40,
            kappa: 100.0,
            size_range: (400, 900),
            noise_std: 1.0,
        },
        workers: 8,
        alpha: 0.05,
        rounds_local: 20,
        rounds_global: 60,
        batch: None,
        subset: None,
        lambda: 0.05,
        stepsize: StepSizeSpec::Fixed(1.0),
        seeds: (31, 32),
        repeats: 1,
        out_dir: out,
        lambda_strong: None,
        smoothness: None,
        smoothness_refresh: false,
        hessian_lipschitz: 0.0,
        estimate_nu: false,
        early_stop_tol: None,
    }
}

#[test]
fn c04_quadratic_runs_reach_the_pooled_minimizer() {
    let started = Instant::now();
    let spec = SyntheticSpec {
        workers: 4,
        dim: 20,
        kappa: 10.0,
        size_range: (2000, 4000),
        noise_std: 1.0,
        seed: 41,
    };
    let (data, _) = generate_synthetic(&spec).unwrap();

    let mut config = base_synth_config(PathBuf::from("unused"));
    config.workers = 4;
    config.dataset = DatasetSpec::Synthetic {
        dim: 20,
        kappa: 10.0,
        size_range: (2000, 4000),
        noise_std: 1.0,
    };
    config.lambda = 30.0;
    config.alpha = 0.005;
    config.rounds_local = 200;
    config.rounds_global = 15;
    config.stepsize = StepSizeSpec::Adaptive;
    config.seeds = (41, 42);

    let output = run(&config, &data, 0).unwrap();
    assert_eq!(output.records.len(), 15);

    let shards: Vec<&[Sample]> = data.shards.iter().map(|s| s.train.as_slice()).collect();
    let w_star = pooled_ridge_minimizer(&shards, 20, config.lambda);
    let rel = norm(&sub(output.final_params.as_slice(), &w_star)) / norm(&w_star);
    assert!(rel <= 1e-6, "criterion 4: relative error {rel}");
    budget(4, started, 10.0);
    pass(4, &format!("adaptive-step run hit the dense pooled minimizer to {rel:.2e} within T = 15"));
}

#[test]
fn c05_larger_kappa_needs_more_local_rounds() {
    let started = Instant::now();
    let mut final_gap = |kappa: f64, rounds_local: usize| -> f64 {
        let spec = SyntheticSpec {
            workers: 8,
            dim: 40,
            kappa,
            size_range: (400, 900),
            noise_std: 1.0,
            seed: 51,
        };
        let (data, _) = generate_synthetic(&spec).unwrap();
        let shards: Vec<&[Sample]> = data.shards.iter().map(|s| s.train.as_slice()).collect();
        let w_star = pooled_ridge_minimizer(&shards, 40, 0.05);
        let model = GlmModel::new(GlmFamily::Ridge, 0.05, 40).unwrap();
        let f_star = shards
            .iter()
            .map(|s| model.loss(s, &ParamVector::new(w_star.clone())).unwrap())
            .sum::<f64>()
            / shards.len() as f64;

        let mut config = base_synth_config(PathBuf::from("unused"));
        config.dataset = DatasetSpec::Synthetic {
            dim: 40,
            kappa,
            size_range: (400, 900),
            noise_std: 1.0,
        };
        config.seeds = (51, 52);
        config.rounds_local = rounds_local;
        let output = run(&config, &data, 0).unwrap();
        (output.records.last().unwrap().train_loss - f_star).max(0.0)
    };

    let mut gap_at = std::collections::BTreeMap::new();
    for kappa in [10.0, 100.0, 1000.0, 10_000.0] {
        let gaps: Vec<f64> = [5usize, 10, 20]
            .iter()
            .map(|r| final_gap(kappa, *r))
            .collect();
        for pair in gaps.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "criterion 5: kappa {kappa}: gap grew with R: {gaps:?}"
            );
        }
        gap_at.insert(kappa as u64, gaps);
    }
    let big = &gap_at[&10_000];
    assert!(
        big[2] <= 0.1 * big[0],
        "criterion 5: kappa 1e4 gap at R=20 ({}) above 0.1x the R=5 gap ({})",
        big[2],
        big[0]
    );
    budget(5, started, 120.0);
    pass(5, &format!(
        "optimality gap non-increasing in R for every kappa; at kappa 1e4, R=20 gap is {:.3}x the R=5 gap",
        big[2] / big[0]
    ));
}

fn mnist_paths() -> Option<(PathBuf, PathBuf)> {
    let mut candidates: Vec<PathBuf> = Vec::new();
    if let Ok(dir) = std::env::var("MNIST_DIR") {
        candidates.push(PathBuf::from(dir));
    }
    candidates.push(PathBuf::from("data/mnist"));
    candidates.push(PathBuf::from("../../data/mnist"));
    for dir in candidates {
        let images = dir.join("train-images-idx3-ubyte");
        let labels = dir.join("train-labels-idx1-ubyte");
        if images.exists() && labels.exists() {
            return Some((images, labels));
        }
    }
    None
}

#[test]
fn c06_c07_mnist_reproduction_and_rounds_to_target() {
    let Some((images, labels)) = mnist_paths() else {
        println!("criterion 6: SKIP - MNIST IDX files not found (set MNIST_DIR)");
        println!("criterion 7: SKIP - MNIST IDX files not found (set MNIST_DIR)");
        return;
    };
    let started = Instant::now();
    let samples = load_idx(&images, &labels).unwrap();
    assert_eq!(samples[0].dim(), 784);
    let data = partition_by_label(samples, 32, 3, (219, 3536), 61).unwrap();

    let mut config = base_synth_config(PathBuf::from("unused"));
    config.workers = 32;
    config.alpha = 0.03;
    config.rounds_local = 40;
    config.rounds_global = 100;
    config.lambda = 0.01;
    config.stepsize = StepSizeSpec::Fixed(1.0);
    config.seeds = (61, 62);

    let done = run(&config, &data, 0).unwrap();
    let done_acc = match done.records.last().unwrap().val_metric {
        ValMetric::Accuracy(a) => a,
        ValMetric::Loss(_) => panic!("criterion 6: expected accuracy"),
    };
    assert!(done_acc >= 0.91, "criterion 6: final accuracy {done_acc}");

    let mut gd = config.clone();
    gd.algo = Algo::Gd;
    gd.stepsize = StepSizeSpec::Fixed(0.2);
    let gd_out = run(&gd, &data, 0).unwrap();
    let gd_acc = match gd_out.records.last().unwrap().val_metric {
        ValMetric::Accuracy(a) => a,
        ValMetric::Loss(_) => panic!("criterion 6: expected accuracy"),
    };
    assert!(
        done_acc - gd_acc >= 0.003,
        "criterion 6: accuracy gap {} below 0.3 points",
        done_acc - gd_acc
    );
    budget(6, started, 1800.0);
    pass(6, &format!("MLR accuracy {done_acc:.4}, first-order baseline {gd_acc:.4}"));

    let done_rounds = rounds_to_target(&done.records, 0.91)
        .unwrap()
        .expect("criterion 7: target accuracy never reached");
    let gd_rounds = rounds_to_target(&gd_out.records, 0.91).unwrap();
    let gd_effective = gd_rounds.unwrap_or(config.rounds_global);
    assert!(
        2 * done_rounds <= gd_effective,
        "criterion 7: rounds-to-target {done_rounds} vs first-order {gd_effective}"
    );
    pass(7, &format!("rounds to 91%: {done_rounds} vs {:?} for first-order", gd_rounds));
}

#[test]
fn c08_communication_accounting() {
    let started = Instant::now();
    let spec = SyntheticSpec {
        workers: 2,
        dim: 4,
        kappa: 2.0,
        size_range: (12, 20),
        noise_std: 0.5,
        seed: 81,
    };
    let (data, _) = generate_synthetic(&spec).unwrap();
    let mut config = base_synth_config(PathBuf::from("unused"));
    config.workers = 2;
    config.dataset = DatasetSpec::Synthetic {
        dim: 4,
        kappa: 2.0,
        size_range: (12, 20),
        noise_std: 0.5,
    };
    config.rounds_local = 4;
    config.rounds_global = 3;
    config.alpha = 0.02;
    config.estimate_nu = false;

    let done = run(&config, &data, 0).unwrap();
    assert_eq!(
        done.records.last().unwrap().comm_rounds,
        2 * 3,
        "criterion 8: averaged rounds must log exactly 2T communications"
    );

    let mut newton = config.clone();
    newton.algo = Algo::Newton;
    let newton_out = run(&newton, &data, 0).unwrap();
    assert_eq!(
        newton_out.records.last().unwrap().comm_rounds,
        (4 + 2) * 3,
        "criterion 8: centralized rounds must log R*T + 2T"
    );
    budget(8, started, 1.0);
    pass(8, "2T for the averaged protocol, R*T + 2T for the centralized baseline");
}

/// Strips the wall-clock column (index 8) from every data row.
fn without_wall(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 10 && fields[8] != "wall_ms" {
                let mut kept = fields.clone();
                kept.remove(8);
                kept.join(",")
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn c09_sampling_degeneracies_are_byte_identical() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut config = base_synth_config(dir.path().join("a"));
    config.workers = 4;
    config.dataset = DatasetSpec::Synthetic {
        dim: 6,
        kappa: 5.0,
        size_range: (24, 40),
        noise_std: 0.5,
    };
    config.rounds_local = 6;
    config.rounds_global = 4;
    config.estimate_nu = false;

    let baseline = run_experiment(&config).unwrap();
    let base_csv = without_wall(&std::fs::read_to_string(&baseline.csv_path).unwrap());
    // run ids encode the knobs, so compare data columns only
    let strip_id = |csv: &str| -> String {
        csv.lines()
            .map(|l| l.splitn(2, ',').nth(1).unwrap_or(l).to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };

    let mut subset_cfg = config.clone();
    subset_cfg.subset = Some(4);
    subset_cfg.out_dir = dir.path().join("b");
    let subset_out = run_experiment(&subset_cfg).unwrap();
    let subset_csv = without_wall(&std::fs::read_to_string(&subset_out.csv_path).unwrap());
    assert_eq!(
        strip_id(&base_csv),
        strip_id(&subset_csv),
        "criterion 9: S = n must reproduce full participation byte-for-byte"
    );

    let resolved = fed_newton::experiment::resolve_dataset(&config).unwrap();
    let max_shard = resolved.shards.iter().map(|s| s.train.len()).max().unwrap();
    let mut batch_cfg = config.clone();
    batch_cfg.batch = Some(max_shard);
    batch_cfg.out_dir = dir.path().join("c");
    let batch_out = run_experiment(&batch_cfg).unwrap();
    let batch_csv = without_wall(&std::fs::read_to_string(&batch_out.csv_path).unwrap());
    assert_eq!(
        strip_id(&base_csv),
        strip_id(&batch_csv),
        "criterion 9: B = shard size must reproduce the full batch byte-for-byte"
    );
    budget(9, started, 10.0);
    pass(9, "S = n and B = full shard reproduce the unsampled traces byte-for-byte");
}

#[test]
fn c10_reruns_are_byte_identical_across_thread_counts() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run_cli = |out: &std::path::Path, threads: &str| -> String {
        let output = Command::new(env!("CARGO_BIN_EXE_fed-newton"))
            .env("FED_NEWTON_THREADS", threads)
            .args([
                "run",
                "--algo", "done",
                "--dataset", "synthetic",
                "--workers", "6",
                "--synth-d", "8",
                "--synth-kappa", "50",
                "--synth-size-min", "30",
                "--synth-size-max", "60",
                "--alpha", "0.05",
                "--R", "6",
                "--T", "4",
                "--lambda", "0.1",
                "--batch", "9",
                "--subset", "4",
                "--repeats", "2",
                "--seed", "10",
                "--out", out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "criterion 10: run failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let stdout = String::from_utf8_lossy(&output.stdout);
        let path = stdout
            .lines()
            .find_map(|l| l.strip_prefix("trace:   "))
            .expect("trace path")
            .trim()
            .to_string();
        without_wall(&std::fs::read_to_string(path).unwrap())
    };

    let single_a = run_cli(&dir.path().join("t1a"), "1");
    let single_b = run_cli(&dir.path().join("t1b"), "1");
    assert_eq!(single_a, single_b, "criterion 10: rerun must be byte-identical");
    let parallel = run_cli(&dir.path().join("t4"), "4");
    assert_eq!(
        single_a, parallel,
        "criterion 10: worker parallelism must not change the trace"
    );
    budget(10, started, 60.0);
    pass(10, "byte-identical traces (wall clock excluded) across reruns and thread counts");
}
