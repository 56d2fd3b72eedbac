use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("no link between transmitter {tx} and user {user}")]
    UnknownLink { tx: usize, user: usize },

    #[error("beamforming weights undefined on subcarrier {subcarrier}: every RRH power is zero")]
    UndefinedWeights { subcarrier: usize },

    #[error("no level-{level} strategy stored for transmitter {tx}")]
    MissingLevel { tx: usize, level: usize },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        /// Best iterate found, row-major transmitters x subcarriers.
        best: Vec<f64>,
    },

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid sweep spec: {0}")]
    InvalidSweep(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the root cause is a solver that ran out of iterations.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NoConvergence { .. } => true,
            Error::Solver { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}
