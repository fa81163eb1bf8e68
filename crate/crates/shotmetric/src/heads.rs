//! Prototype computation and the classification heads operating on episodes.
//!
//! Prototype heads score a query x against class centroids mu_c:
//! the Euclidean head uses `-(sigma/d) * ||x - mu_c||^2`, the cosine head
//! `sigma * <x/||x||, mu_c/||mu_c||>`. Reconstruction heads route each query
//! row through the pooled-feature logits in [`crate::frn`].

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::episode::{ClassLogits, Episode, FeatWeights, Head, HeadConfig};
use crate::error::Error;
use crate::frn::{self, FeaturePool};

/// Mean of each class's support rows, one prototype per row, ordered like
/// `episode.class_ids()`.
///
/// Each coordinate is summed in value order, so the prototype depends only
/// on the multiset of support rows: permuting them changes nothing, down to
/// the last bit.
pub fn compute_prototypes(episode: &Episode) -> DMatrix<f64> {
    let dim = episode.dim();
    let mut prototypes = DMatrix::zeros(episode.way(), dim);
    let mut column = Vec::new();
    for (c, support) in episode.supports().iter().enumerate() {
        let shot = support.nrows() as f64;
        for j in 0..dim {
            column.clear();
            column.extend(support.column(j).iter().copied());
            column.sort_by(f64::total_cmp);
            prototypes[(c, j)] = column.iter().sum::<f64>() / shot;
        }
    }
    prototypes
}

/// Euclidean prototype logits: `scores[q][c] = -(sigma/d) * ||x_q - mu_c||^2`.
///
/// The 1/d normalization keeps logit magnitude comparable across feature
/// widths; d is read from the episode at call time.
pub fn euclidean_proto_logits(
    episode: &Episode,
    config: &HeadConfig,
) -> Result<ClassLogits, Error> {
    config.validate()?;
    let prototypes = compute_prototypes(episode);
    let scale = config.temperature / episode.dim() as f64;
    let query = episode.query();
    let scores = DMatrix::from_fn(episode.num_queries(), episode.way(), |q, c| {
        -scale * (query.row(q) - prototypes.row(c)).norm_squared()
    });
    ClassLogits::new(episode.class_ids().to_vec(), scores)
}

/// Cosine prototype logits: `scores[q][c] = sigma * <x_q / ||x_q||, mu_c / ||mu_c||>`.
///
/// The cosine is clamped to [-1, 1] so scores stay within [-sigma, sigma]
/// even under floating-point rounding. A query or prototype whose norm falls
/// below `config.zero_norm_eps` is degenerate input and reported as
/// [`Error::ZeroNormVector`] rather than silently clamped.
pub fn cosine_proto_logits(episode: &Episode, config: &HeadConfig) -> Result<ClassLogits, Error> {
    config.validate()?;
    let prototypes = compute_prototypes(episode);
    let eps = config.zero_norm_eps;

    let unit_rows = |m: &DMatrix<f64>, what: &str| -> Result<DMatrix<f64>, Error> {
        let mut out = m.clone();
        for i in 0..out.nrows() {
            let norm = out.row(i).norm();
            if norm < eps {
                return Err(Error::ZeroNormVector {
                    what: format!("{what} {i}"),
                    norm,
                    eps,
                });
            }
            let scaled = out.row(i) / norm;
            out.set_row(i, &scaled);
        }
        Ok(out)
    };

    let queries = unit_rows(episode.query(), "query")?;
    let protos = unit_rows(&prototypes, "prototype of class")?;
    let sigma = config.temperature;
    let scores = DMatrix::from_fn(episode.num_queries(), episode.way(), |q, c| {
        sigma * queries.row(q).dot(&protos.row(c)).clamp(-1.0, 1.0)
    });
    ClassLogits::new(episode.class_ids().to_vec(), scores)
}

/// Task-conditions prototypes with one self-attention block plus a residual
/// connection: `refined = P + rowsoftmax((P W_q)(P W_k)^T / sqrt(d)) (P W_v)`.
///
/// When `weights.layer_norm` is set, each refined row is recentered to zero
/// mean, divided by its population standard deviation (epsilon 1e-6 added to
/// the variance), then scaled by `ln_gain` and shifted by `ln_bias`. This is
/// standard layer normalization; the refinement is sometimes described as
/// recentering plus L2 normalization, but dividing by the row norm instead
/// of the standard deviation is a different map and is deliberately not what
/// this function does.
///
/// To classify against refined prototypes, build an episode whose classes
/// each hold one refined row as their support; a single-row class is its own
/// prototype.
pub fn feat_refine(
    prototypes: &DMatrix<f64>,
    weights: &FeatWeights,
) -> Result<DMatrix<f64>, Error> {
    let dim = prototypes.ncols();
    weights.validate(dim)?;

    let queries = prototypes * &weights.w_q;
    let keys = prototypes * &weights.w_k;
    let values = prototypes * &weights.w_v;

    let mut attention = (&queries * keys.transpose()) / (dim as f64).sqrt();
    for i in 0..attention.nrows() {
        let row = softmax_row(&attention.row(i).transpose());
        attention.set_row(i, &row.transpose());
    }

    let mut refined = prototypes + attention * values;
    if weights.layer_norm {
        for i in 0..refined.nrows() {
            let mean = refined.row(i).mean();
            let var = refined
                .row(i)
                .iter()
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / dim as f64;
            let inv_std = 1.0 / (var + 1e-6).sqrt();
            for j in 0..dim {
                refined[(i, j)] =
                    (refined[(i, j)] - mean) * inv_std * weights.ln_gain[j] + weights.ln_bias[j];
            }
        }
    }
    Ok(refined)
}

/// One query's prediction: argmax class plus the softmax probability row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub class_id: String,
    pub probabilities: Vec<f64>,
}

/// Softmax plus argmax per query row. Ties break toward the lowest class
/// index in `class_ids` order.
pub fn predict(logits: &ClassLogits) -> Vec<Prediction> {
    let scores = logits.scores();
    (0..scores.nrows())
        .map(|q| {
            let row = scores.row(q).transpose();
            let probabilities = softmax_row(&row);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            Prediction {
                class_index: best,
                class_id: logits.class_ids()[best].clone(),
                probabilities: probabilities.iter().copied().collect(),
            }
        })
        .collect()
}

/// Numerically stable softmax of one score vector.
fn softmax_row(scores: &DVector<f64>) -> DVector<f64> {
    let max = scores.max();
    let exps: DVector<f64> = scores.map(|v| (v - max).exp());
    let total = exps.sum();
    exps / total
}

/// Dispatches an episode through the head named in `config`.
///
/// Reconstruction heads treat each class's stacked support rows as the
/// support pool and each query row as a single-row query pool.
pub fn classify(episode: &Episode, config: &HeadConfig) -> Result<ClassLogits, Error> {
    config.validate()?;
    match config.head {
        Head::ProtoEuclidean => euclidean_proto_logits(episode, config),
        Head::ProtoCosine => cosine_proto_logits(episode, config),
        Head::FrnFull | Head::FrnSimplified | Head::FrnCosine => frn_logits(episode, config),
    }
}

fn frn_logits(episode: &Episode, config: &HeadConfig) -> Result<ClassLogits, Error> {
    let m = episode.num_queries();
    let n = episode.way();
    let mut scores = DMatrix::zeros(m, n);
    for c in 0..n {
        let support = FeaturePool::new(episode.support(c).clone())?;
        // One covariance solve per class, shared across all query rows.
        let head = frn::ClassHead::new(config.head, &support, config)?;
        for q in 0..m {
            let row: RowDVector<f64> = episode.query().row(q).into_owned();
            let query = FeaturePool::new(DMatrix::from_rows(&[row]))?;
            scores[(q, c)] = head.logit(&query)?;
        }
    }
    ClassLogits::new(episode.class_ids().to_vec(), scores)
}
