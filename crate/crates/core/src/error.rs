use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Projection input is singular or otherwise unusable.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("non-finite state at step {step}: {context}")]
    NonFiniteStep { step: usize, context: String },

    #[error("state is off the constraint set (defect {defect:.3e}) where an on-manifold value is required")]
    OffManifold { defect: f64 },

    #[error("step index {t} out of range for horizon {horizon}")]
    StepOutOfRange { t: usize, horizon: usize },

    #[error("budget {budget} exceeds horizon {horizon}")]
    BudgetExceedsHorizon { budget: usize, horizon: usize },

    #[error("budget exhausted")]
    BudgetExhausted,

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("unknown schedule `{0}`")]
    UnknownSchedule(String),

    #[error("state kind does not match domain `{0}`")]
    StateMismatch(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: String, reason: String },

    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}
