use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit parameters: {0}")]
    InvalidParams(String),

    #[error("ill-posed circuit: {0}")]
    IllPosedCircuit(String),

    #[error("{what} did not converge after {iterations} iterations (residuals: {residuals:?})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dense representation of dimension {0} exceeds the 10^4 guard")]
    DenseGuard(usize),

    #[error("labeling conflict: {0}")]
    Labeling(String),

    #[error("label {0} missing from spectrum")]
    MissingLabel(String),

    #[error("pulse design failed: {0}")]
    Pulse(String),

    #[error("propagation failed: {0}")]
    Propagation(String),

    #[error("gate analysis failed: {0}")]
    Gate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::IllPosedCircuit(_) => 2,
            Error::NonConvergence { .. } | Error::Propagation(_) => 3,
            Error::Labeling(_) | Error::MissingLabel(_) => 4,
            Error::Io(_) => 5,
            _ => 1,
        }
    }
}
