use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{op}: multiplier {multiplier} does not exceed the concavity threshold {threshold}")]
    ConcavityViolation {
        op: &'static str,
        multiplier: f64,
        threshold: f64,
    },

    #[error("{op}: concavity violated at iterate {iteration} (multiplier {multiplier}, threshold {threshold})")]
    ConcavityViolationAt {
        op: &'static str,
        iteration: usize,
        multiplier: f64,
        threshold: f64,
    },

    #[error("{0}: singular linear system")]
    Singular(&'static str),

    #[error("radius {epsilon} is unattainable: {reason}")]
    UnattainableRadius { epsilon: f64, reason: String },

    #[error("perturbation map leaves the support of the covariance; the loss is unbounded")]
    UnboundedLoss,

    #[error("support mismatch at index {index}: source eigenvalue is zero but shifted eigenvalue is {value}")]
    SupportMismatch { index: usize, value: f64 },

    #[error("{op} did not converge after {iterations} iterations")]
    NotConverged { op: &'static str, iterations: usize },

    #[error("{op}: iterate {iteration} left the valid region")]
    InvalidRegion { op: &'static str, iteration: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConcavityViolation { .. }
                | Error::ConcavityViolationAt { .. }
                | Error::Singular(_)
                | Error::NotConverged { .. }
                | Error::InvalidRegion { .. }
        )
    }
}
