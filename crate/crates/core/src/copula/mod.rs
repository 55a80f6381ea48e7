//! Gaussian, Student-t, Clayton and Gumbel copulas: densities, CDFs,
//! sampling, fitting on pseudo-observations and tail dependence, plus the
//! empirical copula.

mod cdf;
mod density;
mod empirical;
mod fit;
mod sample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mathcore::{CorrelationMatrix, MathError, Matrix, StudentT};

pub use cdf::{copula_cdf, copula_cdf_estimate, CdfEstimate};
pub use density::{copula_density, copula_ln_density, density_grid, DensityEvaluator};
pub use empirical::{average_ranks, empirical_copula, pseudo_observations};
pub use fit::{fit_copula, fit_copula_with, fit_pairwise, CopulaFit, FitOptions, PairFit, STUDENT_NU_GRID};
pub use sample::sample_copula;
pub(crate) use sample::RowSampler;

#[derive(Debug, Error)]
pub enum CopulaError {
    #[error("invalid copula parameter: {0}")]
    InvalidParameter(String),
    #[error("{family} copula is only supported in 2 dimensions, got {dim}")]
    UnsupportedDimension { family: Family, dim: usize },
    #[error("point {0:?} is not strictly inside the unit cube")]
    Boundary(Vec<f64>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("unknown copula family {0:?}")]
    UnknownFamily(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Gaussian, Family::StudentT, Family::Clayton, Family::Gumbel];

    /// Display name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Family::Gaussian => "Gaussian",
            Family::StudentT => "Student-t",
            Family::Clayton => "Clayton",
            Family::Gumbel => "Gumbel",
        }
    }

    pub fn is_elliptical(self) -> bool {
        matches!(self, Family::Gaussian | Family::StudentT)
    }

    /// Number of free parameters in dimension `dim`.
    pub fn n_params(self, dim: usize) -> usize {
        let pairs = dim * dim.saturating_sub(1) / 2;
        match self {
            Family::Gaussian => pairs,
            Family::StudentT => pairs + 1,
            Family::Clayton | Family::Gumbel => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = CopulaError;

    fn from_str(s: &str) -> Result<Self, CopulaError> {
        match s.trim().to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "student-t" | "studentt" | "t" | "student" => Ok(Family::StudentT),
            "clayton" => Ok(Family::Clayton),
            "gumbel" => Ok(Family::Gumbel),
            _ => Err(CopulaError::UnknownFamily(s.to_string())),
        }
    }
}

/// A fully parameterized copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", try_from = "RawSpec")]
pub enum CopulaSpec {
    Gaussian { corr: CorrelationMatrix },
    StudentT { corr: CorrelationMatrix, nu: f64 },
    Clayton { theta: f64, dim: usize },
    Gumbel { theta: f64, dim: usize },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
enum RawSpec {
    Gaussian { corr: CorrelationMatrix },
    StudentT { corr: CorrelationMatrix, nu: f64 },
    Clayton { theta: f64, dim: usize },
    Gumbel { theta: f64, dim: usize },
}

impl TryFrom<RawSpec> for CopulaSpec {
    type Error = CopulaError;

    fn try_from(raw: RawSpec) -> Result<Self, CopulaError> {
        match raw {
            RawSpec::Gaussian { corr } => Ok(Self::gaussian(corr)),
            RawSpec::StudentT { corr, nu } => Self::student_t(corr, nu),
            RawSpec::Clayton { theta, dim } => Self::clayton(theta, dim),
            RawSpec::Gumbel { theta, dim } => Self::gumbel(theta, dim),
        }
    }
}

impl CopulaSpec {
    pub fn gaussian(corr: CorrelationMatrix) -> Self {
        Self::Gaussian { corr }
    }

    pub fn independence(dim: usize) -> Self {
        Self::Gaussian { corr: CorrelationMatrix::identity(dim) }
    }

    pub fn student_t(corr: CorrelationMatrix, nu: f64) -> Result<Self, CopulaError> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(CopulaError::InvalidParameter(format!("student-t degrees of freedom {nu} must exceed 2")));
        }
        Ok(Self::StudentT { corr, nu })
    }

    pub fn clayton(theta: f64, dim: usize) -> Result<Self, CopulaError> {
        check_dim(dim)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(CopulaError::InvalidParameter(format!("clayton theta {theta} must be > 0")));
        }
        Ok(Self::Clayton { theta, dim })
    }

    pub fn gumbel(theta: f64, dim: usize) -> Result<Self, CopulaError> {
        check_dim(dim)?;
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(CopulaError::InvalidParameter(format!("gumbel theta {theta} must be >= 1")));
        }
        Ok(Self::Gumbel { theta, dim })
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Gaussian { .. } => Family::Gaussian,
            Self::StudentT { .. } => Family::StudentT,
            Self::Clayton { .. } => Family::Clayton,
            Self::Gumbel { .. } => Family::Gumbel,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { corr } | Self::StudentT { corr, .. } => corr.dim(),
            Self::Clayton { dim, .. } | Self::Gumbel { dim, .. } => *dim,
        }
    }

    pub fn n_params(&self) -> usize {
        self.family().n_params(self.dim())
    }

    pub fn correlation(&self) -> Option<&CorrelationMatrix> {
        match self {
            Self::Gaussian { corr } | Self::StudentT { corr, .. } => Some(corr),
            _ => None,
        }
    }

    /// Same family and shape parameters with a different correlation matrix;
    /// Archimedean specs are returned unchanged.
    pub fn with_correlation(&self, corr: CorrelationMatrix) -> Result<Self, CopulaError> {
        if corr.dim() != self.dim() {
            return Err(CopulaError::Dimension(format!("{}-dim correlation for a {}-dim copula", corr.dim(), self.dim())));
        }
        Ok(match self {
            Self::Gaussian { .. } => Self::Gaussian { corr },
            Self::StudentT { nu, .. } => Self::StudentT { corr, nu: *nu },
            other => other.clone(),
        })
    }

    /// Bivariate margin on coordinates `(i, j)`.
    pub fn pair(&self, i: usize, j: usize) -> Self {
        match self {
            Self::Gaussian { corr } => Self::Gaussian { corr: corr.pair(i, j) },
            Self::StudentT { corr, nu } => Self::StudentT { corr: corr.pair(i, j), nu: *nu },
            Self::Clayton { theta, .. } => Self::Clayton { theta: *theta, dim: 2 },
            Self::Gumbel { theta, .. } => Self::Gumbel { theta: *theta, dim: 2 },
        }
    }

    /// Short parameter summary for reports.
    pub fn describe(&self) -> String {
        match self {
            Self::Gaussian { corr } => format!("mean rho {:.4}", mean(&corr.upper_triangle())),
            Self::StudentT { corr, nu } => format!("mean rho {:.4}, nu {nu:.4}", mean(&corr.upper_triangle())),
            Self::Clayton { theta, .. } | Self::Gumbel { theta, .. } => format!("theta {theta:.4}"),
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn check_dim(dim: usize) -> Result<(), CopulaError> {
    if dim < 2 {
        return Err(CopulaError::Dimension(format!("copula dimension must be at least 2, got {dim}")));
    }
    Ok(())
}

/// Rank-transformed sample: `k x n` with every entry strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations(Matrix);

impl PseudoObservations {
    pub fn new(m: Matrix) -> Result<Self, CopulaError> {
        if let Some(bad) = m.to_rows().into_iter().find(|r| r.iter().any(|&u| !(u > 0.0 && u < 1.0))) {
            return Err(CopulaError::Boundary(bad));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn n_obs(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_obs()).map(|i| self.0[(i, j)]).collect()
    }

    /// Columns `(i, j)` as a bivariate sample.
    pub fn pair(&self, i: usize, j: usize) -> Self {
        Self(Matrix::from_fn(self.n_obs(), 2, |r, c| self.0[(r, if c == 0 { i } else { j })]))
    }

    /// The first `k` rows.
    pub fn head(&self, k: usize) -> Self {
        let k = k.min(self.n_obs());
        Self(Matrix::from_fn(k, self.dim(), |r, c| self.0[(r, c)]))
    }
}

/// Lower and upper tail-dependence coefficients of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDependence {
    pub lower: f64,
    pub upper: f64,
}

/// Tail dependence of coordinates `(i, j)`.
pub fn pair_tail_dependence(spec: &CopulaSpec, i: usize, j: usize) -> TailDependence {
    match spec {
        CopulaSpec::Gaussian { corr } => {
            let both = if corr.get(i, j) >= 1.0 { 1.0 } else { 0.0 };
            TailDependence { lower: both, upper: both }
        }
        CopulaSpec::StudentT { corr, nu } => {
            let rho = corr.get(i, j);
            let arg = -((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt();
            let lambda = (2.0 * StudentT::new(nu + 1.0).expect("nu > 2").cdf(arg)).clamp(0.0, 1.0);
            TailDependence { lower: lambda, upper: lambda }
        }
        CopulaSpec::Clayton { theta, .. } => TailDependence { lower: 2f64.powf(-1.0 / theta), upper: 0.0 },
        CopulaSpec::Gumbel { theta, .. } => TailDependence { lower: 0.0, upper: 2.0 - 2f64.powf(1.0 / theta) },
    }
}

/// Tail dependence averaged over all coordinate pairs.
pub fn tail_dependence(spec: &CopulaSpec) -> TailDependence {
    let n = spec.dim();
    let mut acc = TailDependence { lower: 0.0, upper: 0.0 };
    let mut count = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let t = pair_tail_dependence(spec, i, j);
            acc.lower += t.lower;
            acc.upper += t.upper;
            count += 1.0;
        }
    }
    TailDependence { lower: acc.lower / count, upper: acc.upper / count }
}

/// Kendall's tau implied by a bivariate copula (pair `(i, j)` for elliptical families).
pub fn implied_kendall_tau(spec: &CopulaSpec, i: usize, j: usize) -> f64 {
    match spec {
        CopulaSpec::Gaussian { corr } | CopulaSpec::StudentT { corr, .. } => {
            2.0 / std::f64::consts::PI * corr.get(i, j).asin()
        }
        CopulaSpec::Clayton { theta, .. } => theta / (theta + 2.0),
        CopulaSpec::Gumbel { theta, .. } => 1.0 - 1.0 / theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_domains() {
        assert!(CopulaSpec::clayton(0.0, 2).is_err());
        assert!(CopulaSpec::clayton(0.5, 2).is_ok());
        assert!(CopulaSpec::gumbel(0.99, 2).is_err());
        assert!(CopulaSpec::gumbel(1.0, 3).is_ok());
        assert!(CopulaSpec::student_t(CorrelationMatrix::identity(2), 2.0).is_err());
        assert!(CopulaSpec::clayton(1.0, 1).is_err());
    }

    #[test]
    fn tail_dependence_values() {
        let g = CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.7).unwrap());
        assert_eq!(tail_dependence(&g), TailDependence { lower: 0.0, upper: 0.0 });
        let c = CopulaSpec::clayton(1.0, 2).unwrap();
        assert_eq!(tail_dependence(&c).lower, 0.5);
        let gu = CopulaSpec::gumbel(2.0, 2).unwrap();
        assert!((tail_dependence(&gu).upper - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        let t = CopulaSpec::student_t(CorrelationMatrix::bivariate(0.5).unwrap(), 4.0).unwrap();
        let td = tail_dependence(&t);
        // 2 t_5(-sqrt(5/3)), by the incomplete-beta CDF
        let want = 2.0 * StudentT::new(5.0).unwrap().cdf(-(5.0f64 / 3.0).sqrt());
        assert!((td.lower - want).abs() < 1e-15 && td.lower == td.upper);
        assert!(td.lower > 0.15 && td.lower < 0.35);
    }

    #[test]
    fn spec_serde_round_trip_and_validation() {
        let specs = [
            CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.3).unwrap()),
            CopulaSpec::student_t(CorrelationMatrix::exchangeable(3, 0.2).unwrap(), 5.5).unwrap(),
            CopulaSpec::clayton(2.0, 4).unwrap(),
            CopulaSpec::gumbel(1.5, 2).unwrap(),
        ];
        for s in &specs {
            let json = serde_json::to_string(s).unwrap();
            let back: CopulaSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(&back, s);
        }
        assert!(serde_json::from_str::<CopulaSpec>(r#"{"family":"clayton","theta":-1.0,"dim":2}"#).is_err());
        assert!(serde_json::from_str::<CopulaSpec>(r#"{"family":"gumbel","theta":1.5,"dim":2}"#).is_ok());
    }

    #[test]
    fn family_names_and_counts() {
        for f in Family::ALL {
            assert_eq!(f.label().parse::<Family>().unwrap(), f);
        }
        assert_eq!(Family::Gaussian.n_params(6), 15);
        assert_eq!(Family::StudentT.n_params(6), 16);
        assert_eq!(Family::Clayton.n_params(6), 1);
        assert!("frank".parse::<Family>().is_err());
    }

    #[test]
    fn pseudo_observations_must_be_interior() {
        assert!(PseudoObservations::new(Matrix::from_rows(&[vec![0.5, 1.0]]).unwrap()).is_err());
        assert!(PseudoObservations::new(Matrix::from_rows(&[vec![0.5, 0.1]]).unwrap()).is_ok());
    }
}
