use thiserror::Error;

/// Errors produced by the renormalization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A hypothesis of a renormalization theorem fails.
    #[error("hypothesis violated: {inequality} ({detail})")]
    Hypothesis {
        inequality: &'static str,
        detail: String,
    },

    /// Multipliers satisfy a multiplicative relation that blocks a linear normal form.
    #[error("resonant multipliers: {0}")]
    Resonance(String),

    /// A correspondence or map failed a structural check at construction.
    #[error("construction error: {0}")]
    Construction(String),

    #[error("non-finite evaluation: {0}")]
    NonFinite(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    /// An iterative search hit its cap; the trace holds the last residuals.
    #[error("search failed after {iterations} iterations: {message}")]
    SearchFailure {
        iterations: usize,
        message: String,
        trace: Vec<f64>,
    },

    /// A numerical witness did not behave as the construction requires.
    #[error("numerical diagnostic: {0}")]
    Diagnostic(String),

    /// A caller-supplied identity did not hold on the sample points.
    #[error("verification failed: {0}")]
    Verification(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Inputs violate a hypothesis or a domain restriction.
    Precondition,
    /// The computation ran but its numerical witness failed.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_)
            | Error::Hypothesis { .. }
            | Error::Resonance(_)
            | Error::Construction(_)
            | Error::Lookup(_) => ErrorClass::Precondition,
            Error::NonFinite(_)
            | Error::SearchFailure { .. }
            | Error::Diagnostic(_)
            | Error::Verification(_) => ErrorClass::Numerical,
        }
    }

    pub(crate) fn hypothesis(inequality: &'static str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            inequality,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
