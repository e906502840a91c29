use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants map onto the failure classes the command-line runner turns into
/// exit codes (see [`crate::cli::ExitCode`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A hypothesis of the problem (conditions (C), (N), (A), mass
    /// subcriticality, ...) does not hold.
    #[error("condition ({condition}) violated: {clause}")]
    ConditionViolated {
        condition: &'static str,
        clause: String,
    },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("empty problem: {0}")]
    EmptyProblem(String),

    /// The quadratic form is not positive definite.
    #[error("coercivity violation: {0}")]
    Coercivity(String),

    #[error("eigensolver failed: {message} (residuals {residuals:?})")]
    Eigensolver {
        message: String,
        residuals: Vec<f64>,
    },

    /// A computed quantity contradicts a proven statement; indicates a
    /// discretization or implementation bug.
    #[error("theory violation: {0}")]
    TheoryViolation(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn violated(condition: &'static str, clause: impl Into<String>) -> Self {
        Error::ConditionViolated {
            condition,
            clause: clause.into(),
        }
    }
}
