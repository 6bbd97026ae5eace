use thiserror::Error;

/// Why a convex program could not be started or finished.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityReport {
    /// Name of the constraint that is violated (or cannot be made strict).
    pub constraint: String,
    /// Slack of that constraint at the best point available (non-positive).
    pub slack: f64,
    pub detail: String,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "constraint `{}` has slack {:e}: {}",
            self.constraint, self.slack, self.detail
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("range must be positive, got {0}")]
    NonPositiveRange(f64),

    #[error("entity coincides with antenna {index}; path loss is singular")]
    CoincidentPoint { index: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is singular: {0}")]
    Singular(&'static str),

    #[error("transmit matrix is rank deficient ({frames} frames for {antennas} antennas)")]
    RankDeficient { frames: usize, antennas: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(InfeasibilityReport),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("alternating optimisation aborted in epoch {epoch}: {source} (objective trace {trace:?})")]
    Aborted { epoch: usize, source: Box<Error>, trace: Vec<f64> },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
