use thiserror::Error;

use crate::variational::FixedTimeSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("homogeneity degree alpha = {0} must lie in the open interval (0, 2)")]
    AlphaOutOfRange(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("the zero vector has no direction")]
    ZeroVector,

    #[error("vector norm {0} deviates from 1 by more than 1e-9")]
    NotUnit(f64),

    #[error("configuration violates the Hill boundary: h0 + U = {0}")]
    OutsideHillRegion(f64),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("path reaches a collision and the action diverges for alpha = {0}")]
    InfiniteAction(f64),

    #[error("point ({0}, {1}) lies outside the oracle domain")]
    OutsideDomain(f64, f64),

    #[error("minimizer stopped after {iterations} iterations with gradient norm {grad_norm:e}")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        best: Box<FixedTimeSolution>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
