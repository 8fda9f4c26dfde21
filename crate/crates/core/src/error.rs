use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical divergence at {phase} iteration {iter}")]
    Divergence { phase: &'static str, iter: usize },
    #[error("no Slater point found at any probed leader action")]
    SlaterViolation,
    #[error("estimator `{estimator}` does not support {reason}")]
    UnsupportedEstimator {
        estimator: &'static str,
        reason: String,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
