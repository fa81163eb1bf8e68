//! Episode, head configuration, and logit containers shared by every head.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Default norm threshold below which a query vector or prototype is treated
/// as degenerate by cosine heads.
pub const DEFAULT_ZERO_NORM_EPS: f64 = 1e-12;

/// Classification head selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Negative squared Euclidean distance to class prototypes, scaled by sigma/d.
    ProtoEuclidean,
    /// Cosine similarity to class prototypes, scaled by sigma.
    ProtoCosine,
    /// Full reconstruction logit: negative squared residual via the covariance expansion.
    FrnFull,
    /// First-term reconstruction logit: trace of the shrunk support covariance
    /// against the query covariance.
    FrnSimplified,
    /// Frobenius-normalized inner product of support and query covariances.
    FrnCosine,
}

impl Head {
    pub const ALL: [Head; 5] = [
        Head::ProtoEuclidean,
        Head::ProtoCosine,
        Head::FrnFull,
        Head::FrnSimplified,
        Head::FrnCosine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Head::ProtoEuclidean => "proto_euclidean",
            Head::ProtoCosine => "proto_cosine",
            Head::FrnFull => "frn_full",
            Head::FrnSimplified => "frn_simplified",
            Head::FrnCosine => "frn_cosine",
        }
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Head::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown head '{s}'")))
    }
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ridge-weight parameterization for reconstruction heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrnRegularizer {
    /// rho = lambda * ||S^T S||_F. Invariant to shot and equivariant to
    /// feature scale and dimensionality.
    Frobenius,
    /// rho = lambda * n / d, the original parameterization. Invariant to
    /// shot but not equivariant to scale or dimensionality.
    Legacy,
}

impl FrnRegularizer {
    pub fn name(&self) -> &'static str {
        match self {
            FrnRegularizer::Frobenius => "frobenius",
            FrnRegularizer::Legacy => "legacy",
        }
    }
}

impl std::str::FromStr for FrnRegularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "frobenius" => Ok(FrnRegularizer::Frobenius),
            "legacy" => Ok(FrnRegularizer::Legacy),
            other => Err(Error::InvalidConfig(format!(
                "unknown regularizer '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for FrnRegularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Head configuration. Temperature and lambda are caller-supplied constants;
/// nothing here is learned.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HeadConfig {
    pub head: Head,
    /// Temperature sigma multiplying prototype logits. Must be positive.
    pub temperature: f64,
    /// Ridge weight lambda for reconstruction heads. Must be positive.
    pub frn_lambda: f64,
    pub frn_regularizer: FrnRegularizer,
    /// Norm threshold for the cosine zero-vector guard.
    pub zero_norm_eps: f64,
}

impl HeadConfig {
    pub fn new(head: Head) -> Self {
        HeadConfig {
            head,
            ..HeadConfig::default()
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.frn_lambda = lambda;
        self
    }

    pub fn with_regularizer(mut self, regularizer: FrnRegularizer) -> Self {
        self.frn_regularizer = regularizer;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.frn_lambda > 0.0 && self.frn_lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "frn_lambda must be positive, got {}",
                self.frn_lambda
            )));
        }
        if !(self.zero_norm_eps > 0.0 && self.zero_norm_eps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "zero_norm_eps must be positive, got {}",
                self.zero_norm_eps
            )));
        }
        Ok(())
    }
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            head: Head::ProtoEuclidean,
            temperature: 1.0,
            frn_lambda: 0.5,
            frn_regularizer: FrnRegularizer::Frobenius,
            zero_norm_eps: DEFAULT_ZERO_NORM_EPS,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ClassDoc {
    id: String,
    support: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EpisodeDoc {
    classes: Vec<ClassDoc>,
    query: Vec<Vec<f64>>,
}

/// One sampled task: a labeled support set plus an unlabeled query set.
///
/// Supports are stored per class as a (k_c x d) matrix; queries as (m x d).
/// All matrices share the feature dimension d.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    class_ids: Vec<String>,
    support: Vec<DMatrix<f64>>,
    query: DMatrix<f64>,
}

impl Episode {
    pub fn new(
        class_ids: Vec<String>,
        support: Vec<DMatrix<f64>>,
        query: DMatrix<f64>,
    ) -> Result<Self, Error> {
        if class_ids.len() != support.len() {
            return Err(Error::InvalidEpisode(format!(
                "{} class ids but {} support matrices",
                class_ids.len(),
                support.len()
            )));
        }
        if class_ids.len() < 2 {
            return Err(Error::InvalidEpisode(format!(
                "need at least 2 classes, got {}",
                class_ids.len()
            )));
        }
        for (i, id) in class_ids.iter().enumerate() {
            if class_ids[..i].contains(id) {
                return Err(Error::InvalidEpisode(format!("duplicate class id '{id}'")));
            }
        }
        let dim = query.ncols();
        if dim == 0 {
            return Err(Error::InvalidEpisode("feature dimension is zero".into()));
        }
        if query.nrows() == 0 {
            return Err(Error::InvalidEpisode("query set is empty".into()));
        }
        if !query.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidEpisode(
                "query contains non-finite values".into(),
            ));
        }
        for (id, s) in class_ids.iter().zip(&support) {
            if s.nrows() == 0 {
                return Err(Error::InvalidEpisode(format!(
                    "class '{id}' has no support rows"
                )));
            }
            if s.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.ncols(),
                    context: format!("support of class '{id}'"),
                });
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidEpisode(format!(
                    "support of class '{id}' contains non-finite values"
                )));
            }
        }
        Ok(Episode {
            class_ids,
            support,
            query,
        })
    }

    /// Number of classes (the way).
    pub fn way(&self) -> usize {
        self.class_ids.len()
    }

    /// Feature dimension d.
    pub fn dim(&self) -> usize {
        self.query.ncols()
    }

    /// Number of query rows m.
    pub fn num_queries(&self) -> usize {
        self.query.nrows()
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    /// Support matrix (k_c x d) of class `c`.
    pub fn support(&self, c: usize) -> &DMatrix<f64> {
        &self.support[c]
    }

    pub fn supports(&self) -> &[DMatrix<f64>] {
        &self.support
    }

    pub fn query(&self) -> &DMatrix<f64> {
        &self.query
    }

    /// Parses the episode JSON format:
    /// `{"classes": [{"id": ..., "support": [[...], ...]}, ...], "query": [[...], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: EpisodeDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("episode JSON: {e}")))?;
        let query = matrix_from_rows(&doc.query, "query")?;
        let mut class_ids = Vec::with_capacity(doc.classes.len());
        let mut support = Vec::with_capacity(doc.classes.len());
        for class in doc.classes {
            support.push(matrix_from_rows(
                &class.support,
                &format!("support of class '{}'", class.id),
            )?);
            class_ids.push(class.id);
        }
        Episode::new(class_ids, support, query)
    }

    pub fn to_json(&self) -> String {
        let doc = EpisodeDoc {
            classes: self
                .class_ids
                .iter()
                .zip(&self.support)
                .map(|(id, s)| ClassDoc {
                    id: id.clone(),
                    support: matrix_to_rows(s),
                })
                .collect(),
            query: matrix_to_rows(&self.query),
        };
        serde_json::to_string_pretty(&doc).expect("episode serialization cannot fail")
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], context: &str) -> Result<DMatrix<f64>, Error> {
    if rows.is_empty() {
        return Err(Error::Parse(format!("{context}: no rows")));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(Error::Parse(format!("{context}: empty row")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Parse(format!(
                "{context}: row {i} has length {}, expected {dim}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Per-query, per-class scores prior to softmax. Entries are finite by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLogits {
    class_ids: Vec<String>,
    scores: DMatrix<f64>,
}

impl ClassLogits {
    pub fn new(class_ids: Vec<String>, scores: DMatrix<f64>) -> Result<Self, Error> {
        if class_ids.len() != scores.ncols() {
            return Err(Error::DimensionMismatch {
                expected: class_ids.len(),
                found: scores.ncols(),
                context: "logit columns vs class ids".into(),
            });
        }
        if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogits(format!("score {bad}")));
        }
        Ok(ClassLogits { class_ids, scores })
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    /// (m x n) score matrix: rows are queries, columns follow `class_ids`.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn num_queries(&self) -> usize {
        self.scores.nrows()
    }

    pub fn way(&self) -> usize {
        self.scores.ncols()
    }
}

/// Supplied (not trained) weights for the attention-based prototype refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatWeights {
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
    pub layer_norm: bool,
    pub ln_gain: DVector<f64>,
    pub ln_bias: DVector<f64>,
}

impl FeatWeights {
    /// Identity projections, no layer norm: refinement becomes
    /// `p + softmax(p p^T / sqrt(d)) p`.
    pub fn identity(dim: usize) -> Self {
        FeatWeights {
            w_q: DMatrix::identity(dim, dim),
            w_k: DMatrix::identity(dim, dim),
            w_v: DMatrix::identity(dim, dim),
            layer_norm: false,
            ln_gain: DVector::from_element(dim, 1.0),
            ln_bias: DVector::from_element(dim, 0.0),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), Error> {
        for (name, m) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows().max(m.ncols()),
                    context: format!("{name} must be {dim}x{dim}"),
                });
            }
        }
        if self.layer_norm && (self.ln_gain.len() != dim || self.ln_bias.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.ln_gain.len().max(self.ln_bias.len()),
                context: "ln_gain/ln_bias length".into(),
            });
        }
        Ok(())
    }
}
