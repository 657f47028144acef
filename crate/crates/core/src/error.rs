//! Error type shared across the solver suite.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A caller-supplied argument is outside its documented range.
    InvalidArgument(String),
    /// A problem document failed to parse or validate.
    SpecParse(String),
    /// An iterative solver ran out of iterations; carries the best residual seen.
    NonConvergence { message: String, residual: f64 },
    /// Ergodic policy evaluation hit an inconsistent (multichain) linear system.
    ErgodicityFailure(String),
    /// Simplex pivot below the breakdown threshold, with its tableau location.
    NumericalBreakdown { row: usize, col: usize, pivot: f64 },
    /// The linear program has no feasible point.
    Infeasible(String),
    /// Array or grid shapes do not match.
    ShapeMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SpecParse(msg) => write!(f, "spec parse error: {msg}"),
            Error::NonConvergence { message, residual } => {
                write!(f, "no convergence: {message} (best residual {residual:e})")
            }
            Error::ErgodicityFailure(msg) => write!(f, "{msg}"),
            Error::NumericalBreakdown { row, col, pivot } => {
                write!(f, "numerical breakdown: pivot {pivot:e} at tableau row {row}, column {col}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
