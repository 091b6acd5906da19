use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("refinement did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid singularity spec: {0}")]
    InvalidSpec(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("no sign change found: {0}")]
    Bracket(String),
    #[error("integrand is not integrable against rho^alpha: {0}")]
    DivergentIntegrand(String),
    #[error("invalid truncation level: {0}")]
    InvalidLevel(String),
    #[error("nonlinearity is not subcritical: {0}")]
    SubcriticalityViolated(String),
    #[error("super-solution inequality fails at {} point(s)", .0.len())]
    SupersolutionViolated(Vec<SupersolutionFailure>),
    #[error("fit window too small: {0}")]
    InsufficientWindow(String),
    #[error("degenerate field: {0}")]
    DegenerateField(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("family is inconclusive: {0}")]
    Inconclusive(String),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::NonConvergence(_) => "non_convergence",
            Self::InvalidSpec(_) => "invalid_spec",
            Self::Domain(_) => "domain",
            Self::Bracket(_) => "bracket",
            Self::DivergentIntegrand(_) => "divergent_integrand",
            Self::InvalidLevel(_) => "invalid_level",
            Self::SubcriticalityViolated(_) => "subcriticality_violated",
            Self::SupersolutionViolated(_) => "supersolution_violated",
            Self::InsufficientWindow(_) => "insufficient_window",
            Self::DegenerateField(_) => "degenerate_field",
            Self::Precondition(_) => "precondition",
            Self::Inconclusive(_) => "inconclusive",
        }
    }
}

/// A point where `(-Δ)^α(λ₀w) + (λ₀w)^p` dropped below the tolerance.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SupersolutionFailure {
    pub rho: f64,
    pub relative_residual: f64,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
