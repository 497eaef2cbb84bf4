use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grazing direction |eta'| = 1 has a singular vertical component")]
    GrazingSingularity,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("Green's function evaluated at coincident points")]
    CoincidentPoints,

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("order of the maximizer at k = {k} could not be determined: curve is flat to within {tolerance:.1e}")]
    OrderUndetermined { k: f64, tolerance: f64 },

    #[error("test function pairing vanishes ({pairing:.3e}); choose a different test function")]
    DegenerateTestFunction { pairing: f64 },

    #[error("pairing with the test function vanished at step {step} ({pairing:.3e}); restart with a perturbed initial field")]
    DegenerateInitialization { step: usize, pairing: f64 },

    #[error("iteration diverged at step {step}: non-finite amplitudes")]
    Divergence { step: usize },

    #[error("scatter pass {pass} failed: {source}")]
    Backend {
        pass: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("archive format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn mismatch(reason: impl Into<String>) -> Self {
        Error::DimensionMismatch(reason.into())
    }
}
