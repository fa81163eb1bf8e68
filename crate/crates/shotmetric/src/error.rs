use thiserror::Error;

/// Errors produced by classification heads, reconstruction, and grid analysis.
#[derive(Debug, Error)]
pub enum Error {
    /// A query vector or prototype has norm below the configured epsilon,
    /// so a cosine logit is undefined.
    #[error("zero-norm vector: {what} has norm {norm:e} below epsilon {eps:e}")]
    ZeroNormVector { what: String, norm: f64, eps: f64 },

    /// Support covariance vanishes; the Frobenius ridge weight is zero and
    /// the system may be singular.
    #[error("zero support pool: ||S^T S||_F = 0")]
    ZeroSupport,

    /// Query covariance vanishes; the cosine logit is undefined.
    #[error("zero query pool: ||Q^T Q||_F = 0")]
    ZeroQuery,

    /// Operands disagree on feature dimension.
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    /// Term-ratio denominator is below 1e-12.
    #[error("degenerate term ratio: denominator {denominator:e} below 1e-12")]
    DegenerateRatio { denominator: f64 },

    /// Paired accuracy grids do not share identical shot axes.
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    /// Episode violates a structural invariant.
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),

    /// Feature pool violates a structural invariant.
    #[error("invalid feature pool: {0}")]
    InvalidPool(String),

    /// Head configuration violates an invariant (temperature or lambda not positive).
    #[error("invalid head config: {0}")]
    InvalidConfig(String),

    /// Accuracy grid violates a structural invariant.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Cluster spec violates an invariant or cannot be generated.
    #[error("invalid cluster spec: {0}")]
    InvalidSpec(String),

    /// Logits contain NaN or infinity.
    #[error("non-finite logits: {0}")]
    NonFiniteLogits(String),

    /// Text input (JSON or CSV) does not match the expected schema.
    #[error("parse error: {0}")]
    Parse(String),

    /// A symmetric positive-definite factorization failed. With a positive
    /// ridge weight this cannot happen for well-formed input, so it is
    /// reported as an internal error rather than recovered from.
    #[error("internal numerical failure: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors arising from degenerate numerical input rather than
    /// malformed data, schema, or configuration problems.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroNormVector { .. }
                | Error::ZeroSupport
                | Error::ZeroQuery
                | Error::DegenerateRatio { .. }
                | Error::NonFiniteLogits(_)
                | Error::Internal(_)
        )
    }
}
