//! Seeded synthetic Gaussian episodes, episodic accuracy evaluation, and the
//! support-resampling prediction-consistency experiment.
//!
//! Episodes are drawn from isotropic Gaussian clusters around fixed class
//! means: the minimal model in which Euclidean decision boundaries swing with
//! support noise while cosine boundaries, anchored through the origin, stay
//! put.
//!
//! Every random stream is keyed by `(seed, trial, role)` where the role
//! separates the support draw, the support re-draw, the query draw, and mean
//! generation. Resampling a support set therefore never perturbs the query
//! stream, and parallel evaluation is bit-identical to serial.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Deserialize;

use crate::episode::{Episode, HeadConfig};
use crate::error::Error;
use crate::heads::{classify, predict};

/// Isotropic Gaussian cluster layout: one mean per class plus a shared
/// per-coordinate noise standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    means: DMatrix<f64>,
    stddev: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecDoc {
    Explicit {
        means: Vec<Vec<f64>>,
        stddev: f64,
    },
    Generated {
        way: usize,
        dim: usize,
        mean_norm_range: (f64, f64),
        min_angle_deg: f64,
        seed: u64,
        stddev: f64,
    },
}

impl ClusterSpec {
    pub fn new(means: DMatrix<f64>, stddev: f64) -> Result<Self, Error> {
        if means.nrows() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 classes, got {}",
                means.nrows()
            )));
        }
        if means.ncols() == 0 {
            return Err(Error::InvalidSpec("feature dimension is zero".into()));
        }
        if !means.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSpec("means contain non-finite values".into()));
        }
        if !(stddev > 0.0 && stddev.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "stddev must be positive, got {stddev}"
            )));
        }
        Ok(ClusterSpec { means, stddev })
    }

    /// Draws `way` class means with norms uniform in `norm_range` and unit
    /// directions separated by at least `min_angle_deg`, by rejection
    /// sampling. Deterministic in `seed`.
    pub fn generate(
        way: usize,
        dim: usize,
        norm_range: (f64, f64),
        min_angle_deg: f64,
        seed: u64,
        stddev: f64,
    ) -> Result<Self, Error> {
        if way < 2 || dim == 0 {
            return Err(Error::InvalidSpec(format!(
                "need way >= 2 and dim >= 1, got way {way}, dim {dim}"
            )));
        }
        let (lo, hi) = norm_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "mean_norm_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if !(0.0..=180.0).contains(&min_angle_deg) {
            return Err(Error::InvalidSpec(format!(
                "min_angle_deg must be in [0, 180], got {min_angle_deg}"
            )));
        }
        let max_cos = min_angle_deg.to_radians().cos();
        let mut rng = stream_rng(seed, 0, StreamRole::Means);
        let mut directions: Vec<DVector<f64>> = Vec::with_capacity(way);
        let mut norms: Vec<f64> = Vec::with_capacity(way);
        for _ in 0..way {
            let mut attempts = 0;
            loop {
                attempts += 1;
                if attempts > 10_000 {
                    return Err(Error::InvalidSpec(format!(
                        "could not place {way} directions at {min_angle_deg} degrees in dim {dim}"
                    )));
                }
                let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm < 1e-9 {
                    continue;
                }
                let dir = v / norm;
                if directions.iter().all(|u| dir.dot(u) <= max_cos) {
                    directions.push(dir);
                    break;
                }
            }
            norms.push(if lo == hi { lo } else { rng.gen_range(lo..hi) });
        }
        let means = DMatrix::from_fn(way, dim, |c, j| directions[c][j] * norms[c]);
        ClusterSpec::new(means, stddev)
    }

    /// The reference layout for the consistency experiment: 5-way, 16-dim,
    /// mean norms in [0.5, 2.0], directions 45 degrees apart (seed 11),
    /// noise 0.6.
    pub fn reference() -> Self {
        ClusterSpec::generate(5, 16, (0.5, 2.0), 45.0, 11, 0.6)
            .expect("reference spec parameters are feasible")
    }

    pub fn way(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn stddev(&self) -> f64 {
        self.stddev
    }

    /// Parses either spec JSON form: explicit
    /// `{"means": [[...], ...], "stddev": s}` or generated
    /// `{"way": n, "dim": d, "mean_norm_range": [lo, hi],
    ///   "min_angle_deg": a, "seed": s, "stddev": sd}`.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: SpecDoc = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("cluster spec JSON: {e}")))?;
        match doc {
            SpecDoc::Explicit { means, stddev } => {
                let means = crate::episode::matrix_from_rows(&means, "cluster means")?;
                ClusterSpec::new(means, stddev)
            }
            SpecDoc::Generated {
                way,
                dim,
                mean_norm_range,
                min_angle_deg,
                seed,
                stddev,
            } => ClusterSpec::generate(way, dim, mean_norm_range, min_angle_deg, seed, stddev),
        }
    }
}

/// Episodic accuracy over seeded trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    /// Mean percent accuracy over trials.
    pub mean_accuracy: f64,
    /// Half-width of the normal-approximation 95% confidence interval,
    /// `1.96 * sample std / sqrt(trials)`. Zero for a single trial.
    pub half_ci95: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy)]
enum StreamRole {
    Support = 0,
    Resample = 1,
    Query = 2,
    Means = 3,
}

fn stream_rng(seed: u64, trial: u64, role: StreamRole) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16] = role as u8;
    key[24..32].copy_from_slice(b"epsynth1");
    ChaCha8Rng::from_seed(key)
}

/// Draws `rows_per_class` noisy rows around each class mean, class-major and
/// row-major, so the stream layout is part of the determinism contract.
fn sample_class_stack(
    spec: &ClusterSpec,
    rows_per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DMatrix<f64>> {
    let dim = spec.dim();
    (0..spec.way())
        .map(|c| {
            let mut m = DMatrix::zeros(rows_per_class, dim);
            for r in 0..rows_per_class {
                for j in 0..dim {
                    let noise: f64 = rng.sample(StandardNormal);
                    m[(r, j)] = spec.means()[(c, j)] + spec.stddev() * noise;
                }
            }
            m
        })
        .collect()
}

fn class_ids(way: usize) -> Vec<String> {
    (0..way).map(|c| format!("class_{c}")).collect()
}

fn stack_queries(per_class: Vec<DMatrix<f64>>, dim: usize) -> DMatrix<f64> {
    let total: usize = per_class.iter().map(|m| m.nrows()).sum();
    let mut q = DMatrix::zeros(total, dim);
    let mut row = 0;
    for m in per_class {
        for r in 0..m.nrows() {
            for j in 0..dim {
                q[(row, j)] = m[(r, j)];
            }
            row += 1;
        }
    }
    q
}

fn validate_episode_shape(shot: usize, queries_per_class: usize) -> Result<(), Error> {
    if shot == 0 || queries_per_class == 0 {
        return Err(Error::InvalidSpec(
            "shot and queries_per_class must be at least 1".into(),
        ));
    }
    Ok(())
}

/// One episode for a given trial index. Query rows are grouped by class:
/// row `q` belongs to class `q / queries_per_class`.
pub fn sample_trial_episode(
    spec: &ClusterSpec,
    shot: usize,
    queries_per_class: usize,
    rng_seed: u64,
    trial: u64,
) -> Result<Episode, Error> {
    validate_episode_shape(shot, queries_per_class)?;
    let mut support_rng = stream_rng(rng_seed, trial, StreamRole::Support);
    let mut query_rng = stream_rng(rng_seed, trial, StreamRole::Query);
    let support = sample_class_stack(spec, shot, &mut support_rng);
    let query = stack_queries(
        sample_class_stack(spec, queries_per_class, &mut query_rng),
        spec.dim(),
    );
    Episode::new(class_ids(spec.way()), support, query)
}

/// The trial-0 episode for a seed.
pub fn sample_episode(
    spec: &ClusterSpec,
    shot: usize,
    queries_per_class: usize,
    rng_seed: u64,
) -> Result<Episode, Error> {
    sample_trial_episode(spec, shot, queries_per_class, rng_seed, 0)
}

fn trial_accuracy(
    spec: &ClusterSpec,
    config: &HeadConfig,
    shot: usize,
    queries_per_class: usize,
    rng_seed: u64,
    trial: u64,
) -> Result<f64, Error> {
    let episode = sample_trial_episode(spec, shot, queries_per_class, rng_seed, trial)?;
    let predictions = predict(&classify(&episode, config)?);
    let correct = predictions
        .iter()
        .enumerate()
        .filter(|(q, p)| p.class_index == q / queries_per_class)
        .count();
    Ok(100.0 * correct as f64 / predictions.len() as f64)
}

/// Mean episodic accuracy over `trials` seeded trials. Trials run in
/// parallel; the accumulation order over trial indices is fixed, so results
/// are bit-identical to a serial run.
pub fn evaluate(
    spec: &ClusterSpec,
    config: &HeadConfig,
    shot: usize,
    queries_per_class: usize,
    trials: usize,
    rng_seed: u64,
) -> Result<EvalSummary, Error> {
    config.validate()?;
    validate_episode_shape(shot, queries_per_class)?;
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be at least 1".into()));
    }
    let accuracies: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial_accuracy(spec, config, shot, queries_per_class, rng_seed, t))
        .collect::<Result<_, Error>>()?;
    let mean = accuracies.iter().sum::<f64>() / trials as f64;
    let half_ci95 = if trials < 2 {
        0.0
    } else {
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        1.96 * var.sqrt() / (trials as f64).sqrt()
    };
    Ok(EvalSummary {
        mean_accuracy: mean,
        half_ci95,
        trials,
    })
}

/// Fraction of query predictions preserved when the support set is
/// independently resampled, pooled over all trials.
///
/// Each trial fixes one query set, draws two independent support sets,
/// classifies the queries under both, and counts agreeing predictions.
pub fn consistency_rate(
    spec: &ClusterSpec,
    config: &HeadConfig,
    shot: usize,
    queries_per_class: usize,
    trials: usize,
    rng_seed: u64,
) -> Result<f64, Error> {
    config.validate()?;
    validate_episode_shape(shot, queries_per_class)?;
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be at least 1".into()));
    }
    let agreements: Vec<usize> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut support_rng = stream_rng(rng_seed, trial, StreamRole::Support);
            let mut resample_rng = stream_rng(rng_seed, trial, StreamRole::Resample);
            let mut query_rng = stream_rng(rng_seed, trial, StreamRole::Query);
            let query = stack_queries(
                sample_class_stack(spec, queries_per_class, &mut query_rng),
                spec.dim(),
            );
            let ids = class_ids(spec.way());
            let first = Episode::new(
                ids.clone(),
                sample_class_stack(spec, shot, &mut support_rng),
                query.clone(),
            )?;
            let second = Episode::new(
                ids,
                sample_class_stack(spec, shot, &mut resample_rng),
                query,
            )?;
            let a = predict(&classify(&first, config)?);
            let b = predict(&classify(&second, config)?);
            Ok(a.iter()
                .zip(&b)
                .filter(|(x, y)| x.class_index == y.class_index)
                .count())
        })
        .collect::<Result<_, Error>>()?;
    let total = trials * spec.way() * queries_per_class;
    Ok(agreements.iter().sum::<usize>() as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::Head;
    use approx::assert_abs_diff_eq;

    fn two_cluster_spec(stddev: f64) -> ClusterSpec {
        ClusterSpec::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            stddev,
        )
        .unwrap()
    }

    #[test]
    fn vanishing_noise_reproduces_means() {
        let spec = two_cluster_spec(1e-9);
        let ep = sample_episode(&spec, 2, 1, 0).unwrap();
        for c in 0..2 {
            for r in 0..2 {
                for j in 0..3 {
                    assert_abs_diff_eq!(
                        ep.support(c)[(r, j)],
                        spec.means()[(c, j)],
                        epsilon = 1e-6
                    );
                }
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_episodes() {
        let spec = two_cluster_spec(0.7);
        let a = sample_episode(&spec, 3, 4, 42).unwrap();
        let b = sample_episode(&spec, 3, 4, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_episode(&spec, 3, 4, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn distinct_trials_use_distinct_streams() {
        let spec = two_cluster_spec(0.7);
        let a = sample_trial_episode(&spec, 2, 2, 42, 0).unwrap();
        let b = sample_trial_episode(&spec, 2, 2, 42, 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn support_means_follow_the_law_of_large_numbers() {
        // Pool k=32 support rows over 100 seeds; the empirical per-coordinate
        // mean should sit within 4 standard errors of the class mean.
        let stddev = 0.8;
        let spec = ClusterSpec::generate(2, 16, (1.0, 1.0), 60.0, 5, stddev).unwrap();
        let (k, seeds) = (32, 100);
        let mut sums = DMatrix::<f64>::zeros(2, 16);
        for seed in 0..seeds {
            let ep = sample_episode(&spec, k, 1, seed).unwrap();
            for c in 0..2 {
                for r in 0..k {
                    for j in 0..16 {
                        sums[(c, j)] += ep.support(c)[(r, j)];
                    }
                }
            }
        }
        let n = (k * seeds as usize) as f64;
        let standard_error = stddev / n.sqrt();
        for c in 0..2 {
            for j in 0..16 {
                let dev = (sums[(c, j)] / n - spec.means()[(c, j)]).abs();
                assert!(
                    dev <= 4.0 * standard_error,
                    "coordinate ({c}, {j}) deviates {dev} > {}",
                    4.0 * standard_error
                );
            }
        }
    }

    #[test]
    fn separated_clusters_reach_full_accuracy() {
        let spec = two_cluster_spec(1e-9);
        for head in Head::ALL {
            let summary = evaluate(&spec, &HeadConfig::new(head), 1, 5, 50, 3).unwrap();
            assert_eq!(summary.mean_accuracy, 100.0, "{head}");
        }
    }

    #[test]
    fn head_errors_propagate_from_trials() {
        // Zero means with sub-epsilon noise produce degenerate queries for
        // the cosine head; the error must surface, not be swallowed.
        let spec = ClusterSpec::new(DMatrix::zeros(2, 3), 1e-15).unwrap();
        let err = evaluate(&spec, &HeadConfig::new(Head::ProtoCosine), 1, 2, 4, 5).unwrap_err();
        assert!(matches!(err, crate::error::Error::ZeroNormVector { .. }));
        let err =
            consistency_rate(&spec, &HeadConfig::new(Head::ProtoCosine), 1, 2, 4, 5).unwrap_err();
        assert!(matches!(err, crate::error::Error::ZeroNormVector { .. }));
    }

    #[test]
    fn identical_means_score_at_chance() {
        let spec = ClusterSpec::new(
            DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]),
            0.5,
        )
        .unwrap();
        let summary = evaluate(
            &spec,
            &HeadConfig::new(Head::ProtoEuclidean),
            1,
            5,
            10_000,
            9,
        )
        .unwrap();
        assert!(
            (summary.mean_accuracy - 50.0).abs() <= 3.0 * summary.half_ci95,
            "{summary:?}"
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // the oracle is written with plain indexed loops on purpose
    fn evaluate_matches_duplicate_evaluator() {
        // Independent re-implementation of the evaluation loop: same seeded
        // episodes, plain loops for prototypes, distances, and argmax.
        let spec = ClusterSpec::generate(5, 16, (1.0, 1.0), 60.0, 21, 0.5).unwrap();
        let (shot, qpc, trials, seed) = (1, 6, 40, 13);
        for head in [Head::ProtoEuclidean, Head::ProtoCosine] {
            let summary = evaluate(&spec, &HeadConfig::new(head), shot, qpc, trials, seed).unwrap();

            let mut total = 0.0;
            for trial in 0..trials as u64 {
                let ep = sample_trial_episode(&spec, shot, qpc, seed, trial).unwrap();
                let mut correct = 0usize;
                for q in 0..ep.num_queries() {
                    let mut best = 0usize;
                    let mut best_score = f64::NEG_INFINITY;
                    for c in 0..ep.way() {
                        let s = ep.support(c);
                        let mut centroid = vec![0.0; ep.dim()];
                        for r in 0..s.nrows() {
                            for (j, slot) in centroid.iter_mut().enumerate() {
                                *slot += s[(r, j)] / s.nrows() as f64;
                            }
                        }
                        let score = match head {
                            Head::ProtoEuclidean => {
                                let mut d2 = 0.0;
                                for j in 0..ep.dim() {
                                    d2 += (ep.query()[(q, j)] - centroid[j]).powi(2);
                                }
                                -d2
                            }
                            Head::ProtoCosine => {
                                let mut dot = 0.0;
                                let mut nq = 0.0;
                                let mut nc = 0.0;
                                for j in 0..ep.dim() {
                                    dot += ep.query()[(q, j)] * centroid[j];
                                    nq += ep.query()[(q, j)].powi(2);
                                    nc += centroid[j].powi(2);
                                }
                                dot / (nq.sqrt() * nc.sqrt())
                            }
                            _ => unreachable!(),
                        };
                        if score > best_score {
                            best_score = score;
                            best = c;
                        }
                    }
                    if best == q / qpc {
                        correct += 1;
                    }
                }
                total += 100.0 * correct as f64 / ep.num_queries() as f64;
            }
            assert_abs_diff_eq!(
                summary.mean_accuracy,
                total / trials as f64,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn translation_moves_cosine_but_not_euclidean() {
        let spec = ClusterSpec::generate(4, 8, (0.8, 1.5), 50.0, 2, 0.6).unwrap();
        let shift = 3.0;
        let shifted = ClusterSpec::new(spec.means().map(|v| v + shift), spec.stddev()).unwrap();

        let euclid = HeadConfig::new(Head::ProtoEuclidean);
        let a = evaluate(&spec, &euclid, 2, 5, 60, 4).unwrap();
        let b = evaluate(&shifted, &euclid, 2, 5, 60, 4).unwrap();
        assert_abs_diff_eq!(a.mean_accuracy, b.mean_accuracy, epsilon = 1e-9);

        let cosine = HeadConfig::new(Head::ProtoCosine);
        let c = evaluate(&spec, &cosine, 2, 5, 60, 4).unwrap();
        let d = evaluate(&shifted, &cosine, 2, 5, 60, 4).unwrap();
        assert!((c.mean_accuracy - d.mean_accuracy).abs() > 1e-6);
    }

    #[test]
    fn uniform_scaling_preserves_predictions() {
        let spec = ClusterSpec::generate(4, 8, (0.8, 1.5), 50.0, 6, 0.6).unwrap();
        for alpha in [2.0, 0.5] {
            let scaled = ClusterSpec::new(spec.means() * alpha, spec.stddev() * alpha).unwrap();
            for head in [Head::ProtoEuclidean, Head::ProtoCosine] {
                let config = HeadConfig::new(head);
                let a = evaluate(&spec, &config, 2, 5, 60, 8).unwrap();
                let b = evaluate(&scaled, &config, 2, 5, 60, 8).unwrap();
                assert_eq!(a.mean_accuracy, b.mean_accuracy);
            }
        }
    }

    #[test]
    fn consistency_is_perfect_without_noise() {
        let spec = two_cluster_spec(1e-9);
        for head in [Head::ProtoEuclidean, Head::ProtoCosine] {
            let rate = consistency_rate(&spec, &HeadConfig::new(head), 1, 5, 50, 3).unwrap();
            assert_eq!(rate, 1.0);
        }
    }

    #[test]
    fn consistency_is_a_coin_flip_for_identical_means() {
        let spec = ClusterSpec::new(
            DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]),
            0.5,
        )
        .unwrap();
        let trials = 4000;
        let qpc = 2;
        let rate = consistency_rate(
            &spec,
            &HeadConfig::new(Head::ProtoEuclidean),
            1,
            qpc,
            trials,
            17,
        )
        .unwrap();
        let n = (trials * 2 * qpc) as f64;
        let se = (0.5_f64 * 0.5 / n).sqrt();
        assert!((rate - 0.5).abs() <= 3.0 * se, "rate {rate}");
    }

    #[test]
    fn cosine_predictions_are_more_consistent_on_reference_spec() {
        let spec = ClusterSpec::reference();
        let euclid = consistency_rate(
            &spec,
            &HeadConfig::new(Head::ProtoEuclidean),
            1,
            15,
            1000,
            11,
        )
        .unwrap();
        let cosine =
            consistency_rate(&spec, &HeadConfig::new(Head::ProtoCosine), 1, 15, 1000, 11).unwrap();
        assert!(
            cosine > euclid,
            "cosine {cosine} should exceed euclidean {euclid}"
        );
    }

    #[test]
    fn rates_are_within_unit_interval() {
        let spec = ClusterSpec::reference();
        let rate =
            consistency_rate(&spec, &HeadConfig::new(Head::ProtoCosine), 2, 3, 20, 1).unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn spec_json_parses_both_forms() {
        let explicit = r#"{"means": [[1.0, 0.0], [0.0, 1.0]], "stddev": 0.5}"#;
        let spec = ClusterSpec::from_json(explicit).unwrap();
        assert_eq!(spec.way(), 2);
        assert_eq!(spec.dim(), 2);

        let generated = r#"{"way": 5, "dim": 16, "mean_norm_range": [0.5, 2.0],
                            "min_angle_deg": 45.0, "seed": 11, "stddev": 0.6}"#;
        let spec = ClusterSpec::from_json(generated).unwrap();
        assert_eq!(spec, ClusterSpec::reference());
    }

    #[test]
    fn spec_json_rejects_bad_input() {
        assert!(ClusterSpec::from_json(r#"{"means": [[1.0]], "stddev": 0.5}"#).is_err());
        assert!(ClusterSpec::from_json(r#"{"means": [[1.0],[2.0]], "stddev": 0}"#).is_err());
        assert!(ClusterSpec::from_json(r#"{"way": 1}"#).is_err());
    }

    #[test]
    fn generated_means_respect_norms_and_angles() {
        let spec = ClusterSpec::generate(5, 16, (0.5, 2.0), 45.0, 11, 0.6).unwrap();
        let min_cos = 45.0_f64.to_radians().cos();
        for c in 0..5 {
            let norm = spec.means().row(c).norm();
            assert!((0.5..=2.0).contains(&norm));
            for other in 0..c {
                let dot = spec.means().row(c).dot(&spec.means().row(other))
                    / (norm * spec.means().row(other).norm());
                assert!(dot <= min_cos + 1e-12);
            }
        }
    }
}
