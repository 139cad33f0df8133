use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("output map requires equal link lengths (l1 = {l1}, l2 = {l2})")]
    UnequalLinks { l1: f64, l2: f64 },

    #[error("mass matrix is singular at q = {q:?}")]
    SingularMassMatrix { q: [f64; 3] },

    #[error("loss of control authority: |alpha| = {alpha:e} at q = {q:?}")]
    ControlSingularity { alpha: f64, q: [f64; 3] },

    #[error("cable has no attachment node")]
    NoAttachment,

    #[error("cable relaxation did not converge after {iterations} iterations (residual {residual:e} N)")]
    RelaxationDiverged { iterations: usize, residual: f64 },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("trajectory time is not strictly increasing at row {row} (t = {t})")]
    NonMonotonicTime { row: usize, t: f64 },

    #[error("episode log is empty")]
    EmptyLog,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
