use thiserror::Error;

use crate::solvers::RecoveryResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is rank deficient: rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("subset enumeration would visit {subsets} subsets (limit {limit})")]
    EnumerationGuard { subsets: f64, limit: f64 },

    #[error("exact recovery condition fails: erc = {0}")]
    ErcFailure(f64),

    #[error("design matrix is not orthonormal (max |X^T X - I| = {0:e})")]
    NotOrthonormal(f64),

    #[error("coordinate descent stopped after {sweeps} sweeps with KKT residual {kkt_residual:e}")]
    NotConverged {
        sweeps: usize,
        kkt_residual: f64,
        best: Box<RecoveryResult>,
    },

    #[error("bisection on the penalty weight failed after {iterations} steps: {reason}")]
    BisectionFailed { iterations: usize, reason: String },

    #[error("OMP selected column {index}, making the support rank deficient")]
    DegenerateSelection {
        index: usize,
        partial: Box<RecoveryResult>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
