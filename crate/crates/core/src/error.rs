use thiserror::Error;

use crate::qp::QpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("forward problem is infeasible at the given parameter and signal")]
    InfeasibleForward,
    #[error("implicit update has no feasible leaf")]
    InfeasibleUpdate,
    #[error("objective is not strongly convex (lambda = {lambda:e}); supply eta0 explicitly")]
    NotStronglyConvex { lambda: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
