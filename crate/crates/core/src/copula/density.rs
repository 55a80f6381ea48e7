//! Copula densities.

use crate::mathcore::special::ln_gamma;
use crate::mathcore::{norm_quantile, Cholesky, StudentT};

use super::{CopulaError, CopulaSpec, Family};

/// A spec prepared for repeated log-density evaluation.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    dim: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian { chol: Cholesky },
    StudentT { chol: Cholesky, t: StudentT, nu: f64, constant: f64 },
    Clayton { theta: f64, constant: f64 },
    Gumbel { theta: f64 },
}

impl DensityEvaluator {
    pub fn new(spec: &CopulaSpec) -> Result<Self, CopulaError> {
        let dim = spec.dim();
        let kind = match spec {
            CopulaSpec::Gaussian { corr } => Kind::Gaussian { chol: corr.cholesky() },
            CopulaSpec::StudentT { corr, nu } => {
                let chol = corr.cholesky();
                let constant = student_constant(*nu, dim, chol.ln_det());
                Kind::StudentT { chol, t: StudentT::new(*nu)?, nu: *nu, constant }
            }
            CopulaSpec::Clayton { theta, .. } => Kind::Clayton { theta: *theta, constant: clayton_constant(*theta, dim) },
            CopulaSpec::Gumbel { theta, dim } => {
                if *dim != 2 {
                    return Err(CopulaError::UnsupportedDimension { family: Family::Gumbel, dim: *dim });
                }
                Kind::Gumbel { theta: *theta }
            }
        };
        Ok(Self { dim, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ln c(u)` for an interior point of matching dimension (unchecked).
    pub fn ln_density(&self, u: &[f64], scratch: &mut Vec<f64>) -> f64 {
        match &self.kind {
            Kind::Gaussian { chol } => {
                let x: Vec<f64> = u.iter().map(|&p| norm_quantile(p)).collect();
                gaussian_ln_density_scores(chol, &x, scratch)
            }
            Kind::StudentT { chol, t, nu, constant } => {
                let x: Vec<f64> = u.iter().map(|&p| t.quantile(p)).collect();
                student_ln_density_scores(chol, *nu, *constant, &x, scratch)
            }
            Kind::Clayton { theta, constant } => clayton_ln_density(*theta, *constant, u),
            Kind::Gumbel { theta } => gumbel_ln_density(*theta, u[0], u[1]),
        }
    }
}

/// Gaussian copula log-density at normal scores `x`:
/// `-1/2 ln|S| - 1/2 (x' S^{-1} x - x'x)`.
pub(crate) fn gaussian_ln_density_scores(chol: &Cholesky, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let q = chol.quad_form_inv(x, scratch);
    let xx: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * chol.ln_det() - 0.5 * (q - xx)
}

/// Normalizing part of the Student-t copula log-density.
pub(crate) fn student_constant(nu: f64, dim: usize, ln_det: f64) -> f64 {
    let n = dim as f64;
    ln_gamma(0.5 * (nu + n)) + (n - 1.0) * ln_gamma(0.5 * nu) - n * ln_gamma(0.5 * (nu + 1.0)) - 0.5 * ln_det
}

/// Student-t copula log-density at t scores `x`.
pub(crate) fn student_ln_density_scores(chol: &Cholesky, nu: f64, constant: f64, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let n = x.len() as f64;
    let q = chol.quad_form_inv(x, scratch);
    let marg: f64 = x.iter().map(|v| (v * v / nu).ln_1p()).sum();
    constant - 0.5 * (nu + n) * (q / nu).ln_1p() + 0.5 * (nu + 1.0) * marg
}

/// `sum_{k<n} ln(1 + k theta)`.
pub(crate) fn clayton_constant(theta: f64, dim: usize) -> f64 {
    (0..dim).map(|k| (k as f64 * theta).ln_1p()).sum()
}

/// `ln(sum u_i^{-theta} - n + 1)`, computed without cancellation for small
/// `theta` and without overflow for large ones.
pub(crate) fn clayton_ln_sum(theta: f64, u: &[f64]) -> f64 {
    let a: Vec<f64> = u.iter().map(|&p| -theta * p.ln()).collect();
    let m = a.iter().copied().fold(0.0, f64::max);
    if m < 30.0 {
        a.iter().map(|v| v.exp_m1()).sum::<f64>().ln_1p()
    } else {
        let n = u.len() as f64;
        let s: f64 = a.iter().map(|v| (v - m).exp()).sum::<f64>() + (1.0 - n) * (-m).exp();
        m + s.ln()
    }
}

pub(crate) fn clayton_ln_density(theta: f64, constant: f64, u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let sum_ln_u: f64 = u.iter().map(|p| p.ln()).sum();
    constant - (theta + 1.0) * sum_ln_u - (n + 1.0 / theta) * clayton_ln_sum(theta, u)
}

/// Bivariate Gumbel log-density. With `x = -ln u`, `y = -ln v`,
/// `w = x^theta + y^theta` and `A = w^{1/theta}`:
/// `c = e^{-A} / (u v) (x y)^{theta - 1} w^{1/theta - 2} (A + theta - 1)`.
pub(crate) fn gumbel_ln_density(theta: f64, u: f64, v: f64) -> f64 {
    if theta == 1.0 {
        return 0.0;
    }
    let (x, y) = (-u.ln(), -v.ln());
    let (lx, ly) = (x.ln(), y.ln());
    let ln_w = gumbel_ln_w(theta, lx, ly);
    let a = (ln_w / theta).exp();
    -a + x + y + (theta - 1.0) * (lx + ly) + (1.0 / theta - 2.0) * ln_w + (a + theta - 1.0).ln()
}

/// `ln(e^{theta lx} + e^{theta ly})`.
pub(crate) fn gumbel_ln_w(theta: f64, lx: f64, ly: f64) -> f64 {
    let (hi, lo) = if lx >= ly { (lx, ly) } else { (ly, lx) };
    theta * hi + (theta * (lo - hi)).exp().ln_1p()
}

fn check_point(spec: &CopulaSpec, u: &[f64]) -> Result<(), CopulaError> {
    if u.len() != spec.dim() {
        return Err(CopulaError::Dimension(format!("{}-dim point for a {}-dim copula", u.len(), spec.dim())));
    }
    if u.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(CopulaError::Boundary(u.to_vec()));
    }
    Ok(())
}

/// `ln c(u)` at an interior point.
pub fn copula_ln_density(spec: &CopulaSpec, u: &[f64]) -> Result<f64, CopulaError> {
    let eval = DensityEvaluator::new(spec)?;
    check_point(spec, u)?;
    Ok(eval.ln_density(u, &mut Vec::new()))
}

/// `c(u)` at an interior point.
pub fn copula_density(spec: &CopulaSpec, u: &[f64]) -> Result<f64, CopulaError> {
    copula_ln_density(spec, u).map(f64::exp)
}

/// Density on a `resolution x resolution` grid of cell midpoints over the unit
/// square, as `(u, v, c(u, v))` rows.
pub fn density_grid(spec: &CopulaSpec, resolution: usize) -> Result<Vec<(f64, f64, f64)>, CopulaError> {
    if spec.dim() != 2 {
        return Err(CopulaError::Dimension(format!("density grid needs a bivariate copula, got {}", spec.dim())));
    }
    let eval = DensityEvaluator::new(spec)?;
    let mut scratch = Vec::new();
    let step = 1.0 / resolution as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (u, v) = ((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
            out.push((u, v, eval.ln_density(&[u, v], &mut scratch).exp()));
        }
    }
    Ok(out)
}
