use std::fmt;

/// A single named assumption that a calibration fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: &'static str,
    pub detail: String,
}

impl Violation {
    pub(crate) fn new(assumption: &'static str, detail: impl Into<String>) -> Self {
        Self {
            assumption,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.assumption, self.detail)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("assumption violation: {}", join(.0))]
    AssumptionViolation(Vec<Violation>),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate retention: no report survives detection (m = {m}, p_det = {p_det})")]
    DegenerateRetention { m: f64, p_det: f64 },

    #[error("quantile search did not converge after {iterations} iterations")]
    QuantileNonconvergence { iterations: usize },

    #[error("root search did not converge: {0}")]
    RootNonconvergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ModelError {
    /// True for errors that stem from a numerical routine failing to converge.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            ModelError::QuantileNonconvergence { .. } | ModelError::RootNonconvergence(_)
        )
    }

    /// True for errors caused by an invalid calibration.
    pub fn is_assumption_violation(&self) -> bool {
        matches!(
            self,
            ModelError::AssumptionViolation(_) | ModelError::Config(_) | ModelError::Infeasible(_)
        )
    }
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
