//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (visible with `cargo test --test acceptance --
//! --nocapture`). Tolerances are pinned in the asserts.
//!
//! Criterion 7 (null-goal equivalence) is implemented as stated and is
//! expected to FAIL: the modified accept step keeps a session with
//! probability f(x+)/M even at zero deviation, which concentrates accepted
//! positives' goal features (variance halves) while negatives keep full
//! spread; an exact-greedy GBT mines that asymmetry as a spurious signal, so
//! the zero-deviation model differs from the baseline by far more than
//! sampling noise. See that test's comment for the measurements.

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use samplerank_core::data_model::{
    goal_matrix, Example, FeatureSchema, RowSelection, Session, SessionDataset,
};
use samplerank_core::goal::{build_goal_gaussian, build_goal_gmm, DeltaRule, GoalSpec};
use samplerank_core::linalg::{cholesky, Matrix};
use samplerank_core::metrics::{auc, ndcg};
use samplerank_core::pipeline::{
    run_experiment, DataSource, DensityConfig, ExperimentArtifacts, ExperimentConfig,
    MetricsConfig, NamedGoal, SplitConfig,
};
use samplerank_core::ranker::{GbtModel, TrainConfig};
use samplerank_core::sampler::{
    generalized_sample_rank, sample_rank, Clamp, SamplerConfig, SessionPolicy,
};
use samplerank_core::stats::{fit_gaussian_reg, fit_gmm_full, EmConfig, GaussianModel};
use samplerank_core::stream;
use samplerank_core::synth::SynthConfig;

fn schema_1d() -> FeatureSchema {
    FeatureSchema::new(vec!["x".into()], &["x".into()]).unwrap()
}

/// 1-D sessions whose positives are drawn from N(mu, sd^2).
fn gaussian_sessions_1d(n: usize, mu: f64, sd: f64, seed: u64) -> SessionDataset {
    let mut rng = stream::rng("acceptance.1d", seed, b"");
    let sessions = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            Session {
                session_id: format!("s{i:06}"),
                customer_id: format!("c{:05}", i % 4999),
                examples: vec![
                    Example {
                        features: vec![mu + sd * z],
                        label: 1,
                    },
                    Example {
                        features: vec![rng.random::<f64>()],
                        label: 0,
                    },
                ],
            }
        })
        .collect();
    SessionDataset::new(schema_1d(), sessions)
}

fn additive_goal(deltas: &[(&str, f64)]) -> GoalSpec {
    GoalSpec {
        mu_rules: deltas
            .iter()
            .map(|&(name, delta)| (name.to_string(), DeltaRule::Additive { delta }))
            .collect(),
        ..GoalSpec::default()
    }
}

#[test]
fn c01_sampler_analytic_oracle() {
    let start = Instant::now();
    let base = GaussianModel::new(vec![0.0], Matrix::identity(1)).unwrap();
    let cfg = SamplerConfig::default();

    // base N(0,1), goal N(delta,1): accepted positives ~ N(delta/2, 1/2)
    for delta in [0.5, 1.0] {
        let ds = gaussian_sessions_1d(30_000, 0.0, 1.0, 101);
        let goal = build_goal_gaussian(&base, &additive_goal(&[("x", delta)]), &ds.schema).unwrap();
        let (accepted, report) = sample_rank(&ds, &base, &goal, &cfg).unwrap();
        assert!(
            report.accepted_sessions >= 10_000,
            "need 1e4 accepted, got {}",
            report.accepted_sessions
        );
        let xs: Vec<f64> = accepted
            .sessions
            .iter()
            .map(|s| s.positive().unwrap().features[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(
            (mean - delta / 2.0).abs() < 0.05,
            "delta {delta}: accepted mean {mean}, want {}",
            delta / 2.0
        );
        assert!(
            (var - 0.5).abs() < 0.05,
            "delta {delta}: accepted variance {var}, want 0.5"
        );
    }

    // delta = 0: acceptance rate 1/sqrt(2)
    let ds = gaussian_sessions_1d(10_000, 0.0, 1.0, 102);
    let (_, report) = sample_rank(&ds, &base, &base, &cfg).unwrap();
    let expect = std::f64::consts::FRAC_1_SQRT_2;
    assert!(
        (report.acceptance_rate - expect).abs() < 0.02,
        "rate {} vs 1/sqrt(2) {expect}",
        report.acceptance_rate
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "ACCEPTANCE 01 sampler-analytic-oracle: PASS (rate@0 {:.4}, {elapsed:?})",
        report.acceptance_rate
    );
}

#[test]
fn c02_rejection_rate_quadrature() {
    let start = Instant::now();
    // 2-D correlated truth
    let true_mu = [1.0, 2.0];
    let true_sigma = Matrix::from_rows(vec![vec![1.0, 0.4], vec![0.4, 0.8]]).unwrap();
    let truth = GaussianModel::new(true_mu.to_vec(), true_sigma.clone()).unwrap();
    let l = cholesky(&true_sigma).unwrap();

    let schema = FeatureSchema::new(vec!["u".into(), "v".into()], &["u".into(), "v".into()]).unwrap();
    let mut rng = stream::rng("acceptance.2d", 2, b"");
    let n = 30_000;
    let sessions: Vec<Session> = (0..n)
        .map(|i| {
            let z = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let x = [
                true_mu[0] + l.get(0, 0) * z[0],
                true_mu[1] + l.get(1, 0) * z[0] + l.get(1, 1) * z[1],
            ];
            Session {
                session_id: format!("s{i:06}"),
                customer_id: format!("c{:05}", i % 4999),
                examples: vec![
                    Example { features: x.to_vec(), label: 1 },
                    Example { features: vec![0.0, 0.0], label: 0 },
                ],
            }
        })
        .collect();
    let ds = SessionDataset::new(schema.clone(), sessions);

    let x = goal_matrix(&ds, RowSelection::PositivesOnly);
    let base = fit_gaussian_reg(&x, 0.0).unwrap();
    let goal =
        build_goal_gaussian(&base, &additive_goal(&[("u", 0.5), ("v", -0.3)]), &schema).unwrap();
    let (_, report) = sample_rank(&ds, &base, &goal, &SamplerConfig::default()).unwrap();

    // grid quadrature of integral f_true(x) * min(1, f_goal(x)/M) dx
    let m = base.peak_density();
    let steps = 500;
    let (s1, s2) = (1.0_f64.sqrt(), 0.8_f64.sqrt());
    let (lo1, hi1) = (true_mu[0] - 8.0 * s1, true_mu[0] + 8.0 * s1);
    let (lo2, hi2) = (true_mu[1] - 8.0 * s2, true_mu[1] + 8.0 * s2);
    let (h1, h2) = ((hi1 - lo1) / steps as f64, (hi2 - lo2) / steps as f64);
    let mut integral = 0.0;
    for i in 0..steps {
        for j in 0..steps {
            let p = [
                lo1 + (i as f64 + 0.5) * h1,
                lo2 + (j as f64 + 0.5) * h2,
            ];
            let f = truth.density(&p).unwrap();
            let ratio = (goal.density(&p).unwrap() / m).min(1.0);
            integral += f * ratio * h1 * h2;
        }
    }
    assert!(
        (report.acceptance_rate - integral).abs() < 0.02,
        "empirical {} vs quadrature {integral}",
        report.acceptance_rate
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!(
        "ACCEPTANCE 02 rejection-rate-quadrature: PASS (empirical {:.4} vs {:.4}, {elapsed:?})",
        report.acceptance_rate, integral
    );
}

fn auc_brute_force(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (sp, yp) in scores.iter().zip(labels) {
        if *yp != 1 {
            continue;
        }
        for (sn, yn) in scores.iter().zip(labels) {
            if *yn != 0 {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn c03_metric_oracles() {
    // AUC: 50 random 200-example instances match the pairwise oracle exactly
    let mut rng = stream::rng("acceptance.auc", 3, b"");
    let mut checked = 0;
    while checked < 50 {
        let scores: Vec<f64> = (0..200)
            .map(|_| (rng.random::<f64>() * 20.0).round() / 20.0)
            .collect();
        let labels: Vec<u8> = (0..200).map(|_| u8::from(rng.random::<f64>() < 0.25)).collect();
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        if n_pos == 0 || n_pos == 200 {
            continue;
        }
        let fast = auc(&scores, &labels).unwrap();
        let slow = auc_brute_force(&scores, &labels);
        assert!(
            (fast - slow).abs() <= 1e-12,
            "instance {checked}: {fast} vs {slow}"
        );
        checked += 1;
    }

    // NDCG: hand-computed values for enumerated rank placements. A tree-less
    // model scores every item equally, so the stable tie rule leaves items in
    // their original order and the positive's rank equals its index + 1.
    let flat = GbtModel {
        n_features: 1,
        schema_hash: String::new(),
        base_score: 0.0,
        learning_rate: 0.1,
        trees: vec![],
    };
    let session_with_positive_at = |idx: usize, sid: &str| Session {
        session_id: sid.into(),
        customer_id: "c".into(),
        examples: (0..6)
            .map(|i| Example {
                features: vec![i as f64],
                label: u8::from(i == idx),
            })
            .collect(),
    };
    for (idx, expect) in [
        (0usize, 1.0),
        (1, 1.0 / 3.0_f64.log2()),
        (2, 0.5),
        (3, 1.0 / 5.0_f64.log2()),
        (4, 1.0 / 6.0_f64.log2()),
        (5, 1.0 / 7.0_f64.log2()),
    ] {
        let ds = SessionDataset::new(
            schema_1d(),
            vec![session_with_positive_at(idx, "s")],
        );
        let got = ndcg(&flat, &ds).unwrap();
        assert!((got - expect).abs() <= 1e-15, "rank {}: {got} vs {expect}", idx + 1);
    }
    // averaging across sessions
    let ds = SessionDataset::new(
        schema_1d(),
        vec![session_with_positive_at(0, "a"), session_with_positive_at(2, "b")],
    );
    assert!((ndcg(&flat, &ds).unwrap() - 0.75).abs() <= 1e-15);
    println!("ACCEPTANCE 03 metric-oracles: PASS (50 AUC instances exact, NDCG placements exact)");
}

/// Ratings sweep mirrored from configs/ratings_sweep.json, with every stage
/// seed overridden the way `samplerank run --seed` does it.
fn ratings_sweep_config(seed: u64, out_dir: &Path) -> ExperimentConfig {
    let goals = [0.1, 0.2, 0.3, 0.4, 0.5]
        .iter()
        .enumerate()
        .map(|(i, &delta)| NamedGoal {
            name: format!("goal-{}", i + 1),
            spec: additive_goal(&[("item_rating", delta), ("restaurant_rating", delta)]),
        })
        .collect();
    ExperimentConfig {
        data: DataSource::Synth(SynthConfig { seed, ..SynthConfig::default() }),
        split: SplitConfig { train_fraction: 0.7, seed },
        density: DensityConfig {
            em: EmConfig { seed, ..EmConfig::default() },
            ..DensityConfig::default()
        },
        goals,
        sampler: SamplerConfig {
            seed,
            clamp: Clamp::On,
            session_policy: SessionPolicy::PositiveExample,
        },
        train: TrainConfig { seed, ..TrainConfig::default() },
        metrics: MetricsConfig::default(),
        size_matched_baseline: false,
        out_dir: Some(out_dir.to_path_buf()),
        threads: None,
    }
}

struct Sweep {
    runs: Vec<ExperimentArtifacts>,
    elapsed_secs: f64,
}

fn sweep_over_seeds() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let runs = [0u64, 1, 2]
            .iter()
            .map(|&seed| {
                let dir = tempfile::tempdir().unwrap();
                run_experiment(&ratings_sweep_config(seed, dir.path()), dir.path()).unwrap()
            })
            .collect();
        Sweep {
            runs,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn averaged<F: Fn(&ExperimentArtifacts, usize) -> f64>(runs: &[ExperimentArtifacts], f: F) -> Vec<f64> {
    (0..5)
        .map(|g| runs.iter().map(|r| f(r, g)).sum::<f64>() / runs.len() as f64)
        .collect()
}

/// Adjacent increases in a supposedly non-increasing sequence.
fn increases(seq: &[f64]) -> Vec<f64> {
    seq.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] - w[0]).collect()
}

#[test]
fn c04_monotone_tradeoff() {
    let sweep = sweep_over_seeds();
    assert!(
        sweep.elapsed_secs < 300.0,
        "sweep took {} s, budget 300 s",
        sweep.elapsed_secs
    );
    let auc_curve = averaged(&sweep.runs, |r, g| r.goals[g].eval.auc);
    let ndcg_curve = averaged(&sweep.runs, |r, g| r.goals[g].eval.ndcg);
    for (name, curve) in [("AUC", &auc_curve), ("NDCG", &ndcg_curve)] {
        let violations = increases(curve);
        assert!(
            violations.len() <= 1,
            "{name} curve {curve:?} has {} adjacent increases",
            violations.len()
        );
        if let Some(&v) = violations.first() {
            assert!(v <= 0.005, "{name} adjacent increase {v} exceeds 0.005: {curve:?}");
        }
    }
    println!(
        "ACCEPTANCE 04 monotone-tradeoff: PASS (AUC {:?}, NDCG {:?}, sweep {:.1} s)",
        auc_curve.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        ndcg_curve.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        sweep.elapsed_secs
    );
}

#[test]
fn c05_nudge_direction_and_decay() {
    let sweep = sweep_over_seeds();
    for feature in ["item_rating", "restaurant_rating"] {
        let top1 = averaged(&sweep.runs, |r, g| {
            r.goals[g].incremental.topk_means[feature][&1]
        });
        let top20 = averaged(&sweep.runs, |r, g| {
            r.goals[g].incremental.topk_means[feature][&20]
        });
        for (g, (&d1, &d20)) in top1.iter().zip(&top20).enumerate() {
            assert!(d1 > 0.0, "{feature} goal-{} top@1 delta {d1} not positive", g + 1);
            assert!(
                d1 > d20,
                "{feature} goal-{}: top@1 {d1} not above top@20 {d20}",
                g + 1
            );
        }
        let decreases = top1.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(
            decreases <= 1,
            "{feature} top@1 deltas {top1:?} should increase goal 1 -> 5"
        );
        println!("ACCEPTANCE 05 nudge-direction-decay [{feature}]: PASS (top@1 {top1:?})");
    }
}

#[test]
fn c06_gmm_reduction_bit_identical() {
    let ds = gaussian_sessions_1d(3_000, 0.8, 1.1, 106);
    let x = goal_matrix(&ds, RowSelection::PositivesOnly);
    let gmm_fit = fit_gmm_full(&x, 1, &EmConfig::default()).unwrap();
    let base_gmm = gmm_fit.model;
    let base_gauss = base_gmm.components()[0].clone();

    let spec = additive_goal(&[("x", 0.3)]);
    let goal_gauss = build_goal_gaussian(&base_gauss, &spec, &ds.schema).unwrap();
    let goal_gmm = build_goal_gmm(&base_gmm, &spec, &ds.schema).unwrap();

    let cfg = SamplerConfig { seed: 77, ..SamplerConfig::default() };
    let (plain, plain_report) = sample_rank(&ds, &base_gauss, &goal_gauss, &cfg).unwrap();
    let (general, general_report) =
        generalized_sample_rank(&ds, &base_gmm, &goal_gmm, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let plain_path = dir.path().join("plain.jsonl");
    let general_path = dir.path().join("general.jsonl");
    samplerank_core::data_model::write_sessions(
        &plain,
        &plain_path,
        samplerank_core::data_model::DataFormat::Jsonl,
    )
    .unwrap();
    samplerank_core::data_model::write_sessions(
        &general,
        &general_path,
        samplerank_core::data_model::DataFormat::Jsonl,
    )
    .unwrap();
    let a = std::fs::read(plain_path).unwrap();
    let b = std::fs::read(general_path).unwrap();
    assert_eq!(a, b, "p=1 generalized sampler must reproduce the plain sampler byte-for-byte");
    assert_eq!(plain_report, general_report);
    println!(
        "ACCEPTANCE 06 gmm-reduction: PASS ({} accepted sessions, byte-identical)",
        plain_report.accepted_sessions
    );
}

/// Null-goal equivalence as specified: a zero-deviation goal should sit
/// within two standard errors of the baseline over five seeds.
///
/// EXPECTED RED. Measured on this generator: AUC diff -0.055 +/- 0.002 and
/// NDCG diff -0.038 +/- 0.001 (approximately 29 standard errors). The
/// zero-deviation accept probability f(x+)/M concentrates accepted
/// positives' goal features to half variance while negatives keep full
/// variance (the session decision is driven by the positive alone), and the
/// exact-greedy GBT converts that asymmetry into spurious goal-feature
/// splits (367 -> 476 in tree dumps) at the expense of real signal. A
/// size-matched uniform control costs only -0.005 to -0.010 AUC, so the gap
/// is the concentration itself, not the smaller training set. The effect is
/// unchanged with tiny rating utilities, with the density fit on all rows,
/// and with the clamp off.
#[test]
fn c07_null_goal_equivalence() {
    let mut auc_diffs = Vec::new();
    let mut ndcg_diffs = Vec::new();
    for seed in 0..5u64 {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ratings_sweep_config(seed, dir.path());
        cfg.goals = vec![NamedGoal {
            name: "goal-0".into(),
            spec: additive_goal(&[("item_rating", 0.0), ("restaurant_rating", 0.0)]),
        }];
        let artifacts = run_experiment(&cfg, dir.path()).unwrap();
        auc_diffs.push(artifacts.goals[0].eval.auc - artifacts.baseline.auc);
        ndcg_diffs.push(artifacts.goals[0].eval.ndcg - artifacts.baseline.ndcg);
    }
    let stats = |d: &[f64]| {
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (d.len() - 1) as f64;
        (mean, (var / d.len() as f64).sqrt())
    };
    let (auc_mean, auc_se) = stats(&auc_diffs);
    let (ndcg_mean, ndcg_se) = stats(&ndcg_diffs);
    println!(
        "ACCEPTANCE 07 null-goal-equivalence: measured AUC diff {auc_mean:+.4} (2se {:.4}), NDCG diff {ndcg_mean:+.4} (2se {:.4})",
        2.0 * auc_se,
        2.0 * ndcg_se
    );
    assert!(
        auc_mean.abs() < 2.0 * auc_se,
        "AUC diff {auc_mean:+.4} exceeds 2se {:.4}: the zero-deviation sampler is not \
         metric-neutral (variance-concentration of accepted positives, see test comment)",
        2.0 * auc_se
    );
    assert!(
        ndcg_mean.abs() < 2.0 * ndcg_se,
        "NDCG diff {ndcg_mean:+.4} exceeds 2se {:.4}",
        2.0 * ndcg_se
    );
    println!("ACCEPTANCE 07 null-goal-equivalence: PASS");
}

#[test]
fn c08_em_correctness() {
    let mut rng = stream::rng("acceptance.em", 8, b"");
    let n = 500;
    let mut data = Vec::with_capacity(4 * n);
    for i in 0..2 * n {
        let c = if i < n { 0.0 } else { 10.0 };
        data.push(c + rng.sample::<f64, _>(StandardNormal));
        data.push(c + rng.sample::<f64, _>(StandardNormal));
    }
    let x = Matrix::from_vec(2 * n, 2, data).unwrap();
    let fit = fit_gmm_full(&x, 2, &EmConfig { n_init: 3, ..EmConfig::default() }).unwrap();

    let mut mus: Vec<Vec<f64>> = fit.model.components().iter().map(|c| c.mu().to_vec()).collect();
    mus.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    for (mu, truth) in mus.iter().zip([[0.0, 0.0], [10.0, 10.0]]) {
        for (got, want) in mu.iter().zip(truth) {
            assert!((got - want).abs() < 0.2, "center {got} vs {want}");
        }
    }
    for (run, trace) in fit.traces.iter().enumerate() {
        for w in trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8,
                "run {run}: log-likelihood decreased {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    println!(
        "ACCEPTANCE 08 em-correctness: PASS (centers {:?}, {} monotone traces)",
        mus.iter()
            .map(|m| (m[0] * 100.0).round() / 100.0)
            .collect::<Vec<_>>(),
        fit.traces.len()
    );
}

#[test]
fn c09_run_determinism_serial_vs_parallel() {
    let bin = env!("CARGO_BIN_EXE_samplerank");
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.json");
    let config = serde_json::json!({
        "data": { "synth": { "n_customers": 150, "seed": 9 } },
        "split": { "train_fraction": 0.7, "seed": 9 },
        "goals": [
            { "name": "goal-1", "mu": {
                "item_rating": { "kind": "additive", "delta": 0.2 },
                "restaurant_rating": { "kind": "additive", "delta": 0.2 }
            } }
        ],
        "sampler": { "seed": 9 },
        "train": { "n_trees": 25, "max_depth": 3, "min_samples_leaf": 10, "seed": 9 },
        "metrics": { "ks": [1, 2, 4] }
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let mut reports = Vec::new();
    for (label, threads) in [("serial-a", "1"), ("serial-b", "1"), ("par-a", "0"), ("par-b", "0")] {
        let out = dir.path().join(label);
        let status = std::process::Command::new(bin)
            .args(["run", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "{label} run failed");
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    for other in &reports[1..] {
        assert_eq!(
            &reports[0], other,
            "report.json differs between serial and parallel runs"
        );
    }
    println!(
        "ACCEPTANCE 09 determinism: PASS (4 runs, {} byte report.json identical)",
        reports[0].len()
    );
}

#[test]
fn c10_end_to_end_sanity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ratings_sweep_config(0, dir.path());
    cfg.goals.clear();
    let artifacts = run_experiment(&cfg, dir.path()).unwrap();
    assert!(
        artifacts.baseline.auc >= 0.70,
        "baseline AUC {} below 0.70",
        artifacts.baseline.auc
    );
    assert!(
        artifacts.baseline.ndcg >= 0.50,
        "baseline NDCG {} below 0.50",
        artifacts.baseline.ndcg
    );
    println!(
        "ACCEPTANCE 10 end-to-end-sanity: PASS (auc {:.4}, ndcg {:.4})",
        artifacts.baseline.auc, artifacts.baseline.ndcg
    );
}
