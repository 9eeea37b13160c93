use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in matrix {0}")]
    NonFinite(&'static str),

    /// Q is numerically singular (reciprocal condition estimate below the cap).
    #[error("Q is numerically singular (rcond = {rcond:e})")]
    SingularQ { rcond: f64 },

    #[error("symmetric eigensolver did not converge")]
    EigFailure,

    #[error("objective or gradient is not finite")]
    NonFiniteObjective,

    #[error("conic solver failed: {0}")]
    SolverFailed(String),

    /// The LMI solution X* is too ill-conditioned to build a PH form from.
    #[error("X* is ill-conditioned (rcond = {rcond:e})")]
    IllConditionedX { rcond: f64 },

    #[error("sE - A is singular at s = {0}")]
    PoleAt(Complex64),

    #[error("matrix pencil (E, A) is singular")]
    SingularPencil,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("bisection failed: {0}")]
    BisectionFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
