//! Error type shared across the library.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical kernels, generators, and optimizers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix constructor received NaN/Inf entries or empty dimensions.
    InvalidMatrix(String),
    /// Shapes of two operands are incompatible.
    DimensionMismatch(String),
    /// Row-orthonormalization of a matrix without full row rank.
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    /// Orthonormal complement requested for a square orthonormal matrix.
    NoComplement,
    /// Spectral radius at or above one where a strictly stable matrix is required.
    Unstable { rho_estimate: f64 },
    /// An iterative solver exhausted its budget before reaching its residual target.
    NonConvergence { what: &'static str, residual: f64 },
    /// A generated covariance failed its positive-definiteness check.
    NotPositiveDefinite,
    /// The weight least-squares Gram matrix is numerically singular.
    SingularGram { task: usize },
    /// A per-task sample covariance is numerically singular (typically N2 < d).
    SingularCovariance { task: usize },
    /// A batch split left one of the two parts empty.
    BadSplit { n: usize, n1: usize },
    /// The sample budget cannot cover even the first scheduled block.
    Infeasible { needed: u64, available: u64 },
    /// The forcing covariance of a mixing bound is not invertible.
    SingularForcing,
    /// A precondition not covered by a more specific variant.
    InvalidInput(String),
    /// A training round failed; wraps the underlying error with its round index.
    Round { round: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMatrix(msg) => write!(f, "invalid matrix: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::RankDeficient {
                sigma_min,
                sigma_max,
            } => write!(
                f,
                "rank deficient: sigma_min {sigma_min:.3e} vs sigma_max {sigma_max:.3e}"
            ),
            Error::NoComplement => write!(f, "no orthonormal complement exists when r = d"),
            Error::Unstable { rho_estimate } => {
                write!(f, "spectral radius estimate {rho_estimate:.6} is not < 1")
            }
            Error::NonConvergence { what, residual } => {
                write!(f, "{what} did not converge (residual {residual:.3e})")
            }
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::SingularGram { task } => {
                write!(f, "singular weight Gram matrix for task {task}")
            }
            Error::SingularCovariance { task } => {
                write!(f, "singular sample covariance for task {task}")
            }
            Error::BadSplit { n, n1 } => {
                write!(f, "split of {n} samples with |N1| = {n1} leaves an empty part")
            }
            Error::Infeasible { needed, available } => write!(
                f,
                "schedule infeasible: first block needs {needed} samples, only {available} available"
            ),
            Error::SingularForcing => write!(f, "forcing covariance is singular"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Round { round, source } => write!(f, "round {round}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Round { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub(crate) fn in_round(self, round: usize) -> Error {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}
