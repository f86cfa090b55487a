use thiserror::Error;

/// Errors raised by symbol construction, verification sweeps and solvers.
///
/// Verdict-style outcomes (a failed class check, a PMP violation) are not
/// errors; they are recorded in the corresponding report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("domain error at x={x:?}, xi={xi:?}: {message}")]
    Domain {
        x: Vec<f64>,
        xi: Vec<f64>,
        message: String,
    },

    #[error("numerical integrity error: {0}")]
    NumericalIntegrity(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("degenerate family: {0}")]
    Degenerate(String),

    #[error("near-singular symbol at x={x:?}, xi={xi:?}: p + lambda = {value:e}")]
    NearSingular { x: Vec<f64>, xi: Vec<f64>, value: f64 },

    #[error("incompatible reference functions: {0}")]
    Incompatible(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("symmetry integrity error: {0}")]
    SymmetryIntegrity(String),

    #[error("aborted run after {completed} of {requested} steps: {cause}")]
    AbortedRun {
        completed: usize,
        requested: usize,
        cause: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
