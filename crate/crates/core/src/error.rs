use thiserror::Error;

use crate::multiindex::MultiIndex;

pub type Result<T> = std::result::Result<T, SsmError>;

#[derive(Debug, Error)]
pub enum SsmError {
    #[error("mass matrix factorization failed: {0}")]
    SingularMass(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("factorization of {context} failed; {hint}")]
    Factorization { context: String, hint: String },

    #[error("{context} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("eigenvalue {index} = {re:+.6e}{im:+.6e}i has zero real part; the fixed point is not hyperbolic")]
    NotHyperbolic { index: usize, re: f64, im: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("defective or ill-conditioned pencil: {0}")]
    Defective(String),

    #[error("coefficient {index} requested before it was computed (ordering bug)")]
    MissingCoefficient { index: MultiIndex },

    #[error(
        "homological operator for {index} is singular but no resonance was flagged; \
         increase the resonance tolerance (currently {tolerance})"
    )]
    ToleranceTooTight { index: MultiIndex, tolerance: f64 },

    #[error("solve for {index} failed: {source}")]
    AtIndex {
        index: MultiIndex,
        #[source]
        source: Box<SsmError>,
    },

    #[error("nonlinearity evaluation failed: {message} (input of length {})", input.len())]
    Evaluation { message: String, input: Vec<f64> },

    #[error("multi-index enumeration of {count} entries exceeds capacity")]
    Capacity { count: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SsmError {
    /// Exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SsmError::Config { .. } | SsmError::InvalidInput(_) | SsmError::Parse(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn at(index: &MultiIndex, err: SsmError) -> SsmError {
        match err {
            e @ SsmError::AtIndex { .. } => e,
            e @ SsmError::MissingCoefficient { .. } => e,
            e @ SsmError::ToleranceTooTight { .. } => e,
            e => SsmError::AtIndex {
                index: index.clone(),
                source: Box::new(e),
            },
        }
    }
}
