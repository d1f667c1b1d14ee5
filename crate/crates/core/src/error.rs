//! Error type shared across the crate.

use crate::linalg::CVec;

/// Errors produced by construction, quadrature, propagation, and
/// identification routines.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("matrix logarithm is ambiguous: eigenvalue {re:.6e}{im:+.6e}i lies on the negative real axis")]
    LogBranch { re: f64, im: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("stationary state is not unique: kernel dimension {dim}")]
    DegenerateKernel { dim: usize, vectors: Vec<CVec> },

    #[error("state leaves the single-excitation sector: {0}")]
    Sector(String),

    #[error("horizon {horizon:.3} exceeds the safe fraction of the bath revival time {revival:.3} (safety factor {safety})")]
    Revival {
        horizon: f64,
        revival: f64,
        safety: f64,
    },

    #[error("time step too coarse: jump probability {p:.3} per step exceeds 0.5")]
    JumpStep { p: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse failure: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
