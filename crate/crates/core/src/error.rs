use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transform evaluated at a real argument ({0})")]
    RealArgument(String),

    #[error("Newton solve did not converge after {iterations} iterations (residual {residual:.3e}) at {at}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        at: String,
    },

    #[error("denominator |zwG| = {value:.3e} is below the degeneracy threshold at {at}; enlarge the cone height")]
    DegenerateDenominator { value: f64, at: String },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("sigma-form relations violated: {0}")]
    InconsistentSigmaForm(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate probe set: {0}")]
    DegenerateProbes(String),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::DegenerateDenominator { .. }
                | Error::Quadrature(_)
                | Error::DegenerateProbes(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
