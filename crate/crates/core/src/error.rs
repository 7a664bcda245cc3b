use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single field-level problem found while validating a run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {}", join_issues(.0))]
    Configuration(Vec<ConfigIssue>),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("kernel approximation failed: achieved relative error {achieved:.3e} with {terms} terms")]
    ApproximationFailure { achieved: f64, terms: usize },

    #[error("Picard iteration did not contract: ratio {ratio:.3e} after {iterations} iterations")]
    NonContraction { ratio: f64, iterations: usize },

    #[error("periodic box horizon violated at t = {t}: {detail}")]
    Horizon { t: f64, detail: String },

    #[error("numerical overflow at t = {t}")]
    NumericalOverflow { t: f64 },

    #[error("internal consistency error: {0}")]
    Internal(String),
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}
