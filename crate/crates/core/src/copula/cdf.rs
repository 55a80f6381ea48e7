//! Copula distribution functions.
//!
//! Archimedean families use their closed forms. Elliptical families integrate
//! the joint normal or t probability by sequential conditioning on a
//! randomized rank-1 lattice, doubling the lattice until the standard error
//! across random shifts drops below the target.

use serde::{Deserialize, Serialize};

use crate::mathcore::{norm_cdf, norm_quantile, Cholesky, CorrelationMatrix, Matrix, ProbValue, RandomStream, StudentT};

use super::density::clayton_ln_sum;
use super::{CopulaError, CopulaSpec};

/// Target standard error of the lattice estimate.
pub const CDF_TARGET_SE: f64 = 1e-4;
const SHIFTS: usize = 12;
const MIN_POINTS: usize = 256;
const MAX_POINTS: usize = 1 << 16;
const LATTICE_SEED: u64 = 0x0c0f_1a77_1ce5;

/// A CDF value with its integration standard error (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl CdfEstimate {
    fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

/// `C(u)` for `u` in the closed unit cube.
pub fn copula_cdf(spec: &CopulaSpec, u: &[f64]) -> Result<ProbValue, CopulaError> {
    copula_cdf_estimate(spec, u).map(|e| ProbValue::clamped(e.value))
}

/// `C(u)` together with its numerical standard error.
pub fn copula_cdf_estimate(spec: &CopulaSpec, u: &[f64]) -> Result<CdfEstimate, CopulaError> {
    if u.len() != spec.dim() {
        return Err(CopulaError::Dimension(format!("{}-dim point for a {}-dim copula", u.len(), spec.dim())));
    }
    if u.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(CopulaError::Boundary(u.to_vec()));
    }
    if u.contains(&0.0) {
        return Ok(CdfEstimate::exact(0.0));
    }
    // coordinates at 1 marginalize out
    let active: Vec<usize> = (0..u.len()).filter(|&j| u[j] < 1.0).collect();
    match active.len() {
        0 => return Ok(CdfEstimate::exact(1.0)),
        1 => return Ok(CdfEstimate::exact(u[active[0]])),
        _ => {}
    }
    let v: Vec<f64> = active.iter().map(|&j| u[j]).collect();
    Ok(match spec {
        CopulaSpec::Clayton { theta, .. } => CdfEstimate::exact((-clayton_ln_sum(*theta, &v) / theta).exp()),
        CopulaSpec::Gumbel { theta, .. } => {
            let w: f64 = v.iter().map(|p| (-p.ln()).powf(*theta)).sum();
            CdfEstimate::exact((-w.powf(1.0 / theta)).exp())
        }
        CopulaSpec::Gaussian { corr } => {
            let sub = sub_correlation(corr, &active)?;
            let b: Vec<f64> = v.iter().map(|&p| norm_quantile(p)).collect();
            lattice_estimate(&sub, &b, None)
        }
        CopulaSpec::StudentT { corr, nu } => {
            let sub = sub_correlation(corr, &active)?;
            let t = StudentT::new(*nu)?;
            let b: Vec<f64> = v.iter().map(|&p| t.quantile(p)).collect();
            lattice_estimate(&sub, &b, Some(*nu))
        }
    })
}

fn sub_correlation(corr: &CorrelationMatrix, idx: &[usize]) -> Result<Cholesky, CopulaError> {
    let m = Matrix::from_fn(idx.len(), idx.len(), |r, c| corr.get(idx[r], idx[c]));
    Ok(crate::mathcore::cholesky(&m)?)
}

/// Integrand of the sequential-conditioning transform for
/// `P(X <= b)`, `X = L Y`, evaluated at `w` in `[0,1]^{n-1}`.
struct Integrand<'a> {
    chol: &'a Cholesky,
    b: &'a [f64],
    /// Conditional t laws with ν, ν+1, ... degrees of freedom (t case only).
    ts: Option<(f64, Vec<StudentT>)>,
}

impl Integrand<'_> {
    fn eval(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let l = self.chol.factor();
        let n = self.b.len();
        let mut prob = 1.0;
        let mut ss = 0.0;
        for i in 0..n {
            let shift: f64 = (0..i).map(|j| l[(i, j)] * y[j]).sum();
            let limit = (self.b[i] - shift) / l[(i, i)];
            let (e, scale) = match &self.ts {
                None => (norm_cdf(limit), 1.0),
                Some((nu, ts)) => {
                    let scale = ((nu + ss) / (nu + i as f64)).sqrt();
                    (ts[i].cdf(limit / scale), scale)
                }
            };
            prob *= e;
            if prob == 0.0 || i + 1 == n {
                break;
            }
            let p = (w[i] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            y[i] = match &self.ts {
                None => norm_quantile(p),
                Some((_, ts)) => scale * ts[i].quantile(p),
            };
            ss += y[i] * y[i];
        }
        prob
    }
}

fn lattice_estimate(chol: &Cholesky, b: &[f64], nu: Option<f64>) -> CdfEstimate {
    let n = b.len();
    let ts = nu.map(|nu| (nu, (0..n).map(|i| StudentT::new(nu + i as f64).expect("nu > 0")).collect()));
    let f = Integrand { chol, b, ts };
    let gen = lattice_generator(n.saturating_sub(1));
    let mut stream = RandomStream::new(LATTICE_SEED, n as u64);
    let shifts: Vec<Vec<f64>> = (0..SHIFTS).map(|_| (0..gen.len()).map(|_| stream.next_uniform()).collect()).collect();

    let mut y = vec![0.0; n];
    let mut w = vec![0.0; gen.len()];
    let mut points = MIN_POINTS;
    loop {
        let means: Vec<f64> = shifts
            .iter()
            .map(|shift| {
                let mut acc = 0.0;
                for k in 0..points {
                    for d in 0..gen.len() {
                        let x = (k as f64 * gen[d] + shift[d]).fract();
                        // tent transform periodizes the integrand
                        w[d] = 1.0 - (2.0 * x - 1.0).abs();
                    }
                    acc += f.eval(&w, &mut y);
                }
                acc / points as f64
            })
            .collect();
        let m = SHIFTS as f64;
        let mean = means.iter().sum::<f64>() / m;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        if se <= CDF_TARGET_SE || points >= MAX_POINTS {
            return CdfEstimate { value: mean.clamp(0.0, 1.0), std_error: se };
        }
        points *= 2;
    }
}

/// Richtmyer generator: fractional parts of square roots of primes.
fn lattice_generator(dim: usize) -> Vec<f64> {
    const PRIMES: [f64; 16] = [2., 3., 5., 7., 11., 13., 17., 19., 23., 29., 31., 37., 41., 43., 47., 53.];
    (0..dim).map(|d| PRIMES[d % PRIMES.len()].sqrt().fract()).collect()
}
