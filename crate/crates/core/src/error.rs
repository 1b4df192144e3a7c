use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the operation's domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Rows that parsed but violate a dataset invariant.
    #[error("validation failed for {}: {reason}", ids.join(", "))]
    Validation { ids: Vec<String>, reason: String },

    #[error("bound vacuous for (delta={delta}, gamma={gamma}, eps={eps}): per-sample rate {rate} <= 0")]
    Vacuous {
        delta: f64,
        gamma: f64,
        eps: f64,
        rate: f64,
    },

    #[error("no convergence after {iterations} iterations (last iterate {last})")]
    NonConvergence { iterations: usize, last: f64 },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for failures of an iterative numerical procedure.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Divergence(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
