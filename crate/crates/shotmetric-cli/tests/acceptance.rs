//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Covers golden-number reproduction of published sensitivity scores and
//! gain tables, the closed-form reconstruction identities, the regularizer
//! invariances, head output contracts, decomposition algebra, the
//! directional consistency experiment, and determinism end to end.

use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use shotmetric::frn::{
    check_branch_agreement, check_expansion_identity, check_invariances, check_invariances_with,
    logit_cosine, logit_simplified, FeaturePool,
};
use shotmetric::sensitivity::{decompose, gain_table, AccuracyGrid};
use shotmetric::synth::{consistency_rate, evaluate, ClusterSpec};
use shotmetric::{classify, predict, Episode, FrnRegularizer, Head, HeadConfig};

const GOLDEN_TOL: f64 = 0.03;

fn report(criterion: &str, failures: &[String]) {
    let pass = failures.is_empty();
    println!(
        "acceptance criterion {criterion}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(
        pass,
        "criterion {criterion} failed:\n{}",
        failures.join("\n")
    );
}

fn check(failures: &mut Vec<String>, ok: bool, detail: impl Fn() -> String) {
    if !ok {
        failures.push(detail());
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn load_grid(name: &str) -> AccuracyGrid {
    let path = data(name);
    let text = std::fs::read_to_string(&path).expect("fixture exists");
    AccuracyGrid::from_csv(&text, name.trim_end_matches(".csv")).expect("fixture parses")
}

fn random_episode(rng: &mut ChaCha8Rng) -> Episode {
    let way = rng.gen_range(2..=6);
    let dim = rng.gen_range(1..=10);
    let shot = rng.gen_range(1..=4);
    let queries = rng.gen_range(1..=5);
    let sample = |rng: &mut ChaCha8Rng, rows: usize| {
        DMatrix::from_fn(rows, dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    };
    let support = (0..way).map(|_| sample(rng, shot)).collect();
    let query = sample(rng, queries);
    let ids = (0..way).map(|c| format!("class_{c}")).collect();
    Episode::new(ids, support, query).expect("random episode is valid")
}

fn random_pool(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeaturePool {
    FeaturePool::new(DMatrix::from_fn(rows, cols, |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    }))
    .expect("random pool is valid")
}

#[test]
fn criterion_1_golden_sensitivity_reproduction() {
    let mut failures = Vec::new();

    let proto = decompose(&load_grid("inat_conv4_proto.csv"));
    let expected_means = [49.04, 63.95, 74.17, 79.86, 82.76, 84.30];
    for (i, want) in expected_means.iter().enumerate() {
        check(
            &mut failures,
            (proto.row_means[i] - want).abs() <= GOLDEN_TOL,
            || format!("proto row_mean[{i}] = {}, want {want}", proto.row_means[i]),
        );
    }
    let expected_bias = [0.47, 1.99, 0.16, -2.61];
    for (j, want) in expected_bias.iter().enumerate() {
        check(
            &mut failures,
            (proto.model_bias[j] - want).abs() <= GOLDEN_TOL,
            || {
                format!(
                    "proto model_bias[{j}] = {}, want {want}",
                    proto.model_bias[j]
                )
            },
        );
    }

    // Published sensitivity scores, cross-checked between the per-model
    // accuracy tables and the summary score table.
    let scores = [
        ("inat_conv4_proto.csv", 14.86),
        ("inat_conv4_cosine_proto.csv", 2.13),
        ("cub_conv4_frn.csv", 6.71),
        ("cub_conv4_cosine_frn.csv", 1.29),
        ("min_resnet12_cosine_feat.csv", 0.19),
    ];
    for (name, want) in scores {
        let got = decompose(&load_grid(name)).score;
        check(&mut failures, (got - want).abs() <= GOLDEN_TOL, || {
            format!("{name}: score = {got}, want {want}")
        });
    }

    report("1 (golden sensitivity reproduction)", &failures);
}

#[test]
fn criterion_2_gain_table_reproduction() {
    let mut failures = Vec::new();
    let gains = gain_table(
        &load_grid("inat_conv4_proto.csv"),
        &load_grid("inat_conv4_cosine_proto.csv"),
    )
    .expect("axes match");
    let expected = [13.33, 6.65, 2.48, 0.67, -0.07, -0.39];
    let shots = [1, 2, 4, 8, 16, 32];
    for ((got, want), shot) in gains.iter().zip(expected).zip(shots) {
        check(&mut failures, (got - want).abs() <= GOLDEN_TOL, || {
            format!("gain at test shot {shot} = {got}, want {want}")
        });
    }
    report("2 (gain-table reproduction)", &failures);
}

#[test]
fn criterion_3_woodbury_branch_agreement() {
    let mut failures = Vec::new();
    let start = std::time::Instant::now();
    let outcome = check_branch_agreement(1000, 7);
    let elapsed = start.elapsed();
    check(&mut failures, outcome.passed, || {
        format!(
            "worst branch deviation {} exceeds {}",
            outcome.worst_deviation, outcome.tolerance
        )
    });
    check(&mut failures, elapsed.as_secs_f64() < 10.0, || {
        format!("took {elapsed:?}, budget 10s")
    });
    report("3 (Woodbury branch agreement, 1000 instances)", &failures);
}

#[test]
fn criterion_4_expansion_identity() {
    let mut failures = Vec::new();
    let start = std::time::Instant::now();
    let outcome = check_expansion_identity(1000, 7);
    let elapsed = start.elapsed();
    check(&mut failures, outcome.passed, || {
        format!(
            "worst expansion deviation {} exceeds {}",
            outcome.worst_deviation, outcome.tolerance
        )
    });
    check(&mut failures, elapsed.as_secs_f64() < 10.0, || {
        format!("took {elapsed:?}, budget 10s")
    });
    report("4 (expansion identity, 1000 instances)", &failures);
}

#[test]
fn criterion_5_regularizer_invariances() {
    let mut failures = Vec::new();
    let start = std::time::Instant::now();
    let frobenius = check_invariances(100, 7);
    let legacy = check_invariances_with(FrnRegularizer::Legacy, 100, 7);
    let elapsed = start.elapsed();

    check(&mut failures, frobenius.shot_invariance.passed, || {
        format!(
            "shot invariance worst {}",
            frobenius.shot_invariance.worst_deviation
        )
    });
    check(&mut failures, frobenius.scale_equivariance.passed, || {
        format!(
            "scale equivariance worst {}",
            frobenius.scale_equivariance.worst_deviation
        )
    });
    check(
        &mut failures,
        frobenius.dimension_equivariance.passed,
        || {
            format!(
                "dimension equivariance worst {}",
                frobenius.dimension_equivariance.worst_deviation
            )
        },
    );
    check(&mut failures, !legacy.scale_equivariance.passed, || {
        "legacy regularizer unexpectedly scale-equivariant".to_string()
    });
    check(&mut failures, elapsed.as_secs_f64() < 5.0, || {
        format!("took {elapsed:?}, budget 5s")
    });
    report("5 (invariances + legacy counterexample)", &failures);
}

#[test]
fn criterion_6_head_contract_properties() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(40);

    // Cosine prototype logits bounded by +-sigma.
    for i in 0..1000 {
        let episode = random_episode(&mut rng);
        let sigma = rng.gen_range(0.1..=20.0);
        let config = HeadConfig::new(Head::ProtoCosine).with_temperature(sigma);
        match classify(&episode, &config) {
            Ok(logits) => {
                let max_abs = logits.scores().abs().max();
                check(&mut failures, max_abs <= sigma, || {
                    format!("instance {i}: cosine logit {max_abs} exceeds sigma {sigma}")
                });
            }
            Err(e) => failures.push(format!("instance {i}: cosine head failed: {e}")),
        }
    }

    // Simplified reconstruction logit nonnegative.
    for i in 0..1000 {
        let (n_s, d, m_q) = (
            rng.gen_range(1..=8),
            rng.gen_range(1..=10),
            rng.gen_range(1..=4),
        );
        let support = random_pool(&mut rng, n_s, d);
        let query = random_pool(&mut rng, m_q, d);
        let lambda = (rng.gen_range(1e-3_f64.ln()..=10.0_f64.ln())).exp();
        let config = HeadConfig::default().with_lambda(lambda);
        let z = logit_simplified(&support, &query, &config).expect("valid instance");
        check(&mut failures, z >= 0.0, || {
            format!("instance {i}: simplified logit {z} is negative")
        });
    }

    // Cosine reconstruction logit in [0, 1]; exactly 1 on proportional pools.
    for i in 0..1000 {
        let (n_s, d, m_q) = (
            rng.gen_range(1..=8),
            rng.gen_range(1..=10),
            rng.gen_range(1..=4),
        );
        let support = random_pool(&mut rng, n_s, d);
        let query = random_pool(&mut rng, m_q, d);
        let z = logit_cosine(&support, &query).expect("valid instance");
        check(&mut failures, (0.0..=1.0).contains(&z), || {
            format!("instance {i}: cosine reconstruction logit {z} outside [0, 1]")
        });
        let c = rng.gen_range(0.2..=5.0) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        let proportional = FeaturePool::new(support.features() * c).expect("valid pool");
        let one = logit_cosine(&support, &proportional).expect("valid instance");
        check(&mut failures, (one - 1.0).abs() <= 1e-12, || {
            format!("instance {i}: proportional pools give {one}, want 1")
        });
    }

    // Softmax rows sum to 1 within 1e-9 under every head.
    for i in 0..1000 {
        let episode = random_episode(&mut rng);
        let head = Head::ALL[i % Head::ALL.len()];
        match classify(&episode, &HeadConfig::new(head)) {
            Ok(logits) => {
                for p in predict(&logits) {
                    let total: f64 = p.probabilities.iter().sum();
                    check(&mut failures, (total - 1.0).abs() <= 1e-9, || {
                        format!("instance {i} ({head}): probabilities sum to {total}")
                    });
                }
            }
            Err(e) => failures.push(format!("instance {i} ({head}): classify failed: {e}")),
        }
    }

    report("6 (head-contract properties)", &failures);
}

#[test]
fn criterion_7_decomposition_algebra() {
    let mut failures = Vec::new();
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    for i in 0..100 {
        let t = rng.gen_range(2..=8);
        let j = rng.gen_range(2..=8);
        let values = DMatrix::from_fn(t, j, |_, _| rng.gen_range(20.0..80.0));
        let test_shots: Vec<u32> = (1..=t as u32).collect();
        let train_shots: Vec<u32> = (1..=j as u32).collect();
        let grid = AccuracyGrid::new(
            format!("random_{i}"),
            test_shots.clone(),
            train_shots.clone(),
            values.clone(),
        )
        .expect("random grid is valid");
        let base = decompose(&grid);

        for r in 0..t {
            for c in 0..j {
                let rebuilt = base.row_means[r] + base.model_bias[c] + base.heatmap[(r, c)];
                check(
                    &mut failures,
                    (rebuilt - values[(r, c)]).abs() <= 1e-12,
                    || {
                        format!(
                            "grid {i}: cell ({r}, {c}) rebuilt as {rebuilt}, want {}",
                            values[(r, c)]
                        )
                    },
                );
            }
        }

        let row_shift: Vec<f64> = (0..t).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let col_shift: Vec<f64> = (0..j).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let shifted = DMatrix::from_fn(t, j, |r, c| values[(r, c)] + row_shift[r] + col_shift[c]);
        let shifted_grid =
            AccuracyGrid::new(format!("shifted_{i}"), test_shots, train_shots, shifted)
                .expect("shifted grid stays in range");
        let after = decompose(&shifted_grid);
        let max_diff = (&after.heatmap - &base.heatmap).abs().max();
        check(&mut failures, max_diff <= 1e-9, || {
            format!("grid {i}: bias shift moved the heatmap by {max_diff}")
        });
    }
    let elapsed = start.elapsed();
    check(&mut failures, elapsed.as_secs_f64() < 1.0, || {
        format!("took {elapsed:?}, budget 1s")
    });

    report("7 (decomposition algebra, 100 grids)", &failures);
}

#[test]
fn criterion_8_consistency_experiment() {
    let mut failures = Vec::new();
    let start = std::time::Instant::now();

    let rate = |spec: &ClusterSpec, head: Head, seed: u64| {
        consistency_rate(spec, &HeadConfig::new(head), 1, 15, 1000, seed)
            .expect("consistency run succeeds")
    };

    let reference = ClusterSpec::reference();
    let euclid = rate(&reference, Head::ProtoEuclidean, 11);
    let cosine = rate(&reference, Head::ProtoCosine, 11);
    check(&mut failures, cosine > euclid, || {
        format!("reference spec: cosine {cosine} <= euclidean {euclid}")
    });

    let mut wins = 0;
    for seed in 1..=10 {
        let spec = ClusterSpec::generate(5, 16, (0.5, 2.0), 45.0, seed, 0.6)
            .expect("independent spec generates");
        if rate(&spec, Head::ProtoCosine, seed) > rate(&spec, Head::ProtoEuclidean, seed) {
            wins += 1;
        }
    }
    check(&mut failures, wins >= 8, || {
        format!("cosine ordering held for only {wins}/10 independent seeds")
    });
    let elapsed = start.elapsed();
    check(&mut failures, elapsed.as_secs_f64() < 30.0, || {
        format!("took {elapsed:?}, budget 30s")
    });

    report("8 (directional consistency experiment)", &failures);
}

#[test]
fn criterion_9_determinism() {
    let mut failures = Vec::new();

    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_shotmetric"))
            .args(args)
            .output()
            .expect("binary runs")
    };

    // Repeated CLI invocations are byte-identical.
    let spec = data("spec_reference.json");
    let consistency_args = [
        "consistency",
        spec.to_str().unwrap(),
        "--trials",
        "100",
        "--seed",
        "11",
        "--json",
    ];
    let a = run(&consistency_args);
    let b = run(&consistency_args);
    check(
        &mut failures,
        a.status.success() && a.stdout == b.stdout,
        || "consistency invocations differ".to_string(),
    );

    let out_dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_determinism");
    let _ = std::fs::remove_dir_all(&out_dir);
    std::fs::create_dir_all(&out_dir).unwrap();
    let grid = data("inat_conv4_proto.csv");
    let sensitivity_args = [
        "sensitivity",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let first = run(&sensitivity_args);
    let first_report = std::fs::read(out_dir.join("inat_conv4_proto.report.csv")).unwrap();
    let second = run(&sensitivity_args);
    let second_report = std::fs::read(out_dir.join("inat_conv4_proto.report.csv")).unwrap();
    check(
        &mut failures,
        first.status.success() && first.stdout == second.stdout && first_report == second_report,
        || "sensitivity invocations differ".to_string(),
    );

    // Parallel and serial evaluation agree exactly.
    let cluster = ClusterSpec::reference();
    let config = HeadConfig::new(Head::ProtoEuclidean);
    let summaries: Vec<_> = [1usize, 4]
        .iter()
        .map(|threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(*threads)
                .build()
                .expect("pool builds");
            pool.install(|| evaluate(&cluster, &config, 2, 5, 200, 11).expect("evaluate runs"))
        })
        .collect();
    check(&mut failures, summaries[0] == summaries[1], || {
        format!("serial {:?} != parallel {:?}", summaries[0], summaries[1])
    });

    report("9 (determinism)", &failures);
}
