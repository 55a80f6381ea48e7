//! Numerical kernel: special functions, distributions, dense linear algebra,
//! a bounded Nelder-Mead minimizer and seeded random streams.

pub mod dist;
pub mod linalg;
pub mod optimize;
pub mod random;
pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dist::{
    norm_cdf, norm_ln_pdf, norm_pdf, norm_quantile, std_normal_cdf, std_normal_quantile, student_t_cdf,
    student_t_quantile, StudentT,
};
pub use linalg::{cholesky, symmetric_eigen, Cholesky, CorrelationMatrix, Matrix, RepairReport};
pub use optimize::{minimize, Bound, MinimizeOptions, Minimum, Termination};
pub use random::RandomStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("objective is not finite at the starting point")]
    StartNotFinite,
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ProbValue(f64);

impl ProbValue {
    pub fn new(p: f64) -> Result<Self, MathError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(MathError::Domain(format!("{p} is not a probability")))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(p: f64) -> Self {
        Self(if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) })
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ProbValue {
    type Error = MathError;

    fn try_from(p: f64) -> Result<Self, MathError> {
        Self::new(p)
    }
}

impl From<ProbValue> for f64 {
    fn from(p: ProbValue) -> f64 {
        p.0
    }
}
