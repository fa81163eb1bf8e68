//! Metric few-shot classifier heads as closed-form linear algebra, plus the
//! analysis pipeline that separates genuine shot sensitivity from test-shot
//! and model bias in accuracy grids.
//!
//! The crate has four parts:
//!
//! - [`heads`]: prototype computation, Euclidean and cosine prototype logits,
//!   attention-based prototype refinement, and softmax prediction over
//!   [`Episode`]s.
//! - [`frn`]: feature-reconstruction classification on pooled features —
//!   the closed-form ridge solution (both regularizers, both inverse
//!   branches), the expanded, simplified, and cosine logits, and numerical
//!   checks for the reconstruction's invariance properties.
//! - [`sensitivity`]: decomposition of test-shot x train-shot accuracy grids
//!   into test-shot bias, model bias, and a corrected heatmap whose spread is
//!   the shot-sensitivity score.
//! - [`synth`]: seeded synthetic Gaussian episodes, episodic accuracy
//!   evaluation, and the support-resampling prediction-consistency
//!   experiment.
//!
//! All operations are pure functions of their inputs; values are immutable
//! after construction and safe to share across threads.
//!
//! ```
//! use nalgebra::DMatrix;
//! use shotmetric::{classify, predict, Episode, Head, HeadConfig};
//!
//! // A 2-way episode: one support vector per class, one query.
//! let episode = Episode::new(
//!     vec!["wren".into(), "crow".into()],
//!     vec![
//!         DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
//!         DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
//!     ],
//!     DMatrix::from_row_slice(1, 2, &[0.9, 0.2]),
//! )?;
//!
//! let config = HeadConfig::new(Head::ProtoCosine).with_temperature(10.0);
//! let logits = classify(&episode, &config)?;
//! let prediction = &predict(&logits)[0];
//! assert_eq!(prediction.class_id, "wren");
//! # Ok::<(), shotmetric::Error>(())
//! ```

pub mod episode;
pub mod error;
pub mod frn;
pub mod heads;
pub mod sensitivity;
pub mod synth;

pub use episode::{ClassLogits, Episode, FeatWeights, FrnRegularizer, Head, HeadConfig};
pub use error::Error;
pub use frn::{FeaturePool, InverseBranch, ReconstructionResult};
pub use heads::{classify, compute_prototypes, predict, Prediction};
pub use sensitivity::{decompose, gain_table, sensitivity_score, AccuracyGrid, SensitivityReport};
pub use synth::{consistency_rate, evaluate, sample_episode, ClusterSpec, EvalSummary};
