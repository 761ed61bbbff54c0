use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor operations, extractor training, chart fitting
/// and the simulation/evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible; both shapes are named.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A projection vector with zero (or non-finite) norm cannot be normalized.
    #[error("cannot normalize a zero-norm projection vector")]
    ZeroVector,

    /// A batch operation requires at least one sample.
    #[error("batch contains no samples")]
    EmptyBatch,

    /// Labels are missing, mismatched in length, or not contiguous 0..n-1.
    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    /// Scatter computation needs at least two classes.
    #[error("scatter is degenerate: all samples belong to a single class")]
    SingleClass,

    /// Within-class scatter is exactly zero; the Fisher ratio is unbounded
    /// and the caller must regularize.
    #[error("infinite class separation: within-class scatter is zero")]
    InfiniteSeparation,

    /// The requested feature count exceeds what the data can support.
    #[error("requested {requested} features but the cap is {cap} ({constraint})")]
    InfeasibleFeatureCount {
        requested: usize,
        cap: usize,
        constraint: String,
    },

    /// A scalar argument is outside its legal range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Phase-I feature covariance is singular or too ill-conditioned to
    /// invert (condition number above the guard threshold).
    #[error("singular feature covariance (condition number {cond:.3e})")]
    SingularCovariance { cond: f64 },

    /// The in-control purge loop discarded too many training points.
    #[error("insufficient in-control data: {remaining} points retained, at least {needed} required")]
    InsufficientInControlData { remaining: usize, needed: usize },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
