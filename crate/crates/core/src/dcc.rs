//! DCC(1,1) dynamic correlation on standardized residuals, with correlation
//! targeting.
//!
//! `Q_t = (1 - a - b) Qbar + a z_{t-1} z_{t-1}' + b Q_{t-1}`, `Q_1 = Qbar`,
//! and `R_t` is `Q_t` rescaled to unit diagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garch::GarchParams;
use crate::mathcore::{cholesky, minimize, Bound, MathError, Matrix, MinimizeOptions, RandomStream};

/// Upper limit on `a + b` used while fitting.
pub const MAX_PERSISTENCE: f64 = 0.9999;

#[derive(Debug, Error)]
pub enum DccError {
    #[error("invalid DCC parameters: {0}")]
    InvalidParams(String),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("need at least 2 series, got {0}")]
    TooFewSeries(usize),
    #[error("residual column {0} is constant")]
    ConstantColumn(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccParams {
    /// Loading on the lagged residual outer product.
    pub theta1: f64,
    /// Loading on the lagged `Q`.
    pub theta2: f64,
    /// Unconditional second moment of the residuals.
    pub qbar: Matrix,
}

impl DccParams {
    pub fn new(theta1: f64, theta2: f64, qbar: Matrix) -> Result<Self, DccError> {
        let p = Self { theta1, theta2, qbar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DccError> {
        if !(self.theta1 >= 0.0 && self.theta2 >= 0.0 && self.theta1 + self.theta2 < 1.0) {
            return Err(DccError::InvalidParams(format!(
                "need theta1, theta2 >= 0 and theta1 + theta2 < 1, got ({}, {})",
                self.theta1, self.theta2
            )));
        }
        if !self.qbar.is_square() || !self.qbar.is_symmetric(1e-12) {
            return Err(DccError::InvalidParams("Qbar must be square and symmetric".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.qbar.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccFit {
    pub params: DccParams,
    pub loglik: f64,
    pub converged: bool,
    /// One-step-ahead correlation `R_{T+1}`.
    pub forecast: Matrix,
    /// In-sample correlations `R_1 .. R_T`.
    #[serde(skip)]
    pub r_path: Vec<Matrix>,
}

impl DccFit {
    /// Rebuilds the in-sample path and forecast at fixed parameters.
    pub fn from_params(params: DccParams, z: &Matrix, converged: bool) -> Result<Self, DccError> {
        params.validate()?;
        check_dims(&params, z)?;
        let (q_path, r_path) = q_recursion(&params, z)?;
        let forecast = next_correlation(&params, q_path.last(), z.rows().checked_sub(1).map(|t| z.row(t)));
        let loglik = dcc_loglik(&params, z)?;
        Ok(Self { params, loglik, converged, forecast, r_path })
    }

    /// Upper triangles of `R_t`, one row per `t`.
    pub fn r_path_rows(&self) -> Vec<Vec<f64>> {
        self.r_path
            .iter()
            .map(|r| {
                let n = r.rows();
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| r[(i, j)]).collect()
            })
            .collect()
    }
}

fn check_dims(params: &DccParams, z: &Matrix) -> Result<(), DccError> {
    if z.cols() != params.dim() {
        return Err(DccError::Dimension(format!("{} residual columns for a {}-dim Qbar", z.cols(), params.dim())));
    }
    Ok(())
}

/// Sample second moment `(1/T) sum z_t z_t'`.
pub fn second_moment(z: &Matrix) -> Matrix {
    let (t, n) = (z.rows(), z.cols());
    let mut q = Matrix::zeros(n, n);
    for s in 0..t {
        let row = z.row(s);
        for i in 0..n {
            for j in 0..=i {
                q[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = q[(i, j)] / t as f64;
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    q
}

/// `R = diag(Q)^{-1/2} Q diag(Q)^{-1/2}` with the diagonal set to exactly 1.
pub fn normalize(q: &Matrix) -> Matrix {
    let n = q.rows();
    let d: Vec<f64> = (0..n).map(|i| q[(i, i)].sqrt()).collect();
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { (q[(i, j)] / (d[i] * d[j])).clamp(-1.0, 1.0) })
}

fn step(params: &DccParams, q_prev: &Matrix, z_prev: &[f64]) -> Matrix {
    let c = 1.0 - params.theta1 - params.theta2;
    let n = params.dim();
    Matrix::from_fn(n, n, |i, j| {
        c * params.qbar[(i, j)] + params.theta1 * z_prev[i] * z_prev[j] + params.theta2 * q_prev[(i, j)]
    })
}

fn next_correlation(params: &DccParams, q_last: Option<&Matrix>, z_last: Option<&[f64]>) -> Matrix {
    match (q_last, z_last) {
        (Some(q), Some(z)) => normalize(&step(params, q, z)),
        _ => normalize(&params.qbar),
    }
}

/// The `Q_t` and `R_t` sequences for residuals `z` (`T x n`).
pub fn q_recursion(params: &DccParams, z: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>), DccError> {
    params.validate()?;
    check_dims(params, z)?;
    let mut qs: Vec<Matrix> = Vec::with_capacity(z.rows());
    for t in 0..z.rows() {
        let q = match qs.last() {
            None => params.qbar.clone(),
            Some(prev) => step(params, prev, z.row(t - 1)),
        };
        qs.push(q);
    }
    let rs = qs.iter().map(normalize).collect();
    Ok((qs, rs))
}

/// Gaussian quasi-log-likelihood of the correlation part,
/// `-1/2 sum_t [ln|R_t| + z_t' R_t^{-1} z_t - z_t' z_t]`.
pub fn dcc_loglik(params: &DccParams, z: &Matrix) -> Result<f64, DccError> {
    params.validate()?;
    check_dims(params, z)?;
    Ok(quasi_loglik(params.theta1, params.theta2, &params.qbar, z))
}

fn quasi_loglik(a: f64, b: f64, qbar: &Matrix, z: &Matrix) -> f64 {
    let params = DccParams { theta1: a, theta2: b, qbar: qbar.clone() };
    let mut q = qbar.clone();
    let mut scratch = Vec::new();
    let mut ll = 0.0;
    for t in 0..z.rows() {
        if t > 0 {
            q = step(&params, &q, z.row(t - 1));
        }
        let r = normalize(&q);
        let Ok(chol) = cholesky(&r) else { return f64::NEG_INFINITY };
        let zt = z.row(t);
        let zz: f64 = zt.iter().map(|v| v * v).sum();
        ll -= 0.5 * (chol.ln_det() + chol.quad_form_inv(zt, &mut scratch) - zz);
    }
    ll
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DccOptions {
    pub min_obs: usize,
    /// Log-likelihood gain `theta2` must earn over the `theta2 = 0` fit.
    pub theta2_min_gain: f64,
    pub optimizer: MinimizeOptions,
}

impl Default for DccOptions {
    fn default() -> Self {
        Self { min_obs: 50, theta2_min_gain: 1.92, optimizer: MinimizeOptions::default() }
    }
}

/// Documented optimizer start.
pub const DCC_START: (f64, f64) = (0.02, 0.95);

/// Fits `(theta1, theta2)` by maximizing the Gaussian quasi-likelihood with
/// `Qbar` fixed at the sample second moment.
pub fn fit_dcc(z: &Matrix, opts: &DccOptions) -> Result<DccFit, DccError> {
    let (t, n) = (z.rows(), z.cols());
    if n < 2 {
        return Err(DccError::TooFewSeries(n));
    }
    if t < opts.min_obs.max(2) {
        return Err(DccError::TooShort { needed: opts.min_obs.max(2), got: t });
    }
    for j in 0..n {
        let first = z[(0, j)];
        if (0..t).all(|s| z[(s, j)] == first) {
            return Err(DccError::ConstantColumn(j));
        }
        if (0..t).any(|s| !z[(s, j)].is_finite()) {
            return Err(DccError::Dimension(format!("non-finite residual in column {j}")));
        }
    }
    let qbar = second_moment(z);
    cholesky(&normalize(&qbar))?;

    let nll = |a: f64, b: f64| {
        let v = -quasi_loglik(a, b, &qbar, z);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let bounds = [Bound::Interval(0.0, MAX_PERSISTENCE), Bound::Interval(0.0, 1.0)];
    let mut best: Option<(f64, f64, f64, bool)> = None;
    for (a0, b0) in [DCC_START, (0.05, 0.80), (0.05, 0.10)] {
        let p0 = a0 + b0;
        let m = minimize(|x| nll(x[0] * x[1], x[0] * (1.0 - x[1])), &[p0, a0 / p0], &bounds, &opts.optimizer)?;
        let (a, b) = (m.x[0] * m.x[1], m.x[0] * (1.0 - m.x[1]));
        if best.is_none_or(|(_, _, f, _)| m.fx < f) {
            best = Some((a, b, m.fx, m.converged()));
        }
    }
    let (mut a, mut b, mut f, mut converged) = best.expect("starts are non-empty");

    // theta2 is unidentified when theta1 is near zero; keep it only if it pays
    let start_nll = nll(DCC_START.0, DCC_START.1);
    let m = minimize(|x| nll(x[0], 0.0), &[0.05], &[Bound::Interval(0.0, MAX_PERSISTENCE)], &opts.optimizer)?;
    if m.fx < f + opts.theta2_min_gain && m.fx <= start_nll {
        (a, b, f, converged) = (m.x[0], 0.0, m.fx, m.converged());
    }
    if start_nll < f {
        (a, b, converged) = (DCC_START.0, DCC_START.1, false);
    }
    DccFit::from_params(DccParams { theta1: a, theta2: b, qbar }, z, converged)
}

/// `H_t = D_t R_t D_t` with `D_t = diag(sigma)`.
pub fn covariance_at(fit: &DccFit, sigma: &[f64], t: usize) -> Result<Matrix, DccError> {
    let r = fit
        .r_path
        .get(t)
        .ok_or_else(|| DccError::Dimension(format!("time index {t} beyond {} steps", fit.r_path.len())))?;
    covariance(r, sigma)
}

/// `D R D` for a correlation `r` and volatilities `sigma`.
pub fn covariance(r: &Matrix, sigma: &[f64]) -> Result<Matrix, DccError> {
    if sigma.len() != r.rows() {
        return Err(DccError::Dimension(format!("{} volatilities for a {}-dim correlation", sigma.len(), r.rows())));
    }
    Ok(Matrix::from_fn(r.rows(), r.cols(), |i, j| sigma[i] * r[(i, j)] * sigma[j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DccSimulation {
    /// `T x n` returns.
    pub returns: Matrix,
    /// `T x n` conditional volatilities.
    pub sigma: Matrix,
    /// `T x n` standardized residuals, `z_t ~ N(0, R_t)`.
    pub residuals: Matrix,
    pub correlations: Vec<Matrix>,
}

/// Simulates GARCH marginals coupled through DCC correlations. Residuals are
/// Gaussian with correlation `R_t`; the marginal innovation family is not
/// used.
pub fn simulate_dcc(
    params: &DccParams,
    marginals: &[GarchParams],
    len: usize,
    stream: &mut RandomStream,
) -> Result<DccSimulation, DccError> {
    params.validate()?;
    let n = params.dim();
    if marginals.len() != n {
        return Err(DccError::Dimension(format!("{} marginals for {n} series", marginals.len())));
    }
    for m in marginals {
        m.validate().map_err(|e| DccError::InvalidParams(e.to_string()))?;
    }
    let mut returns = Matrix::zeros(len, n);
    let mut sigma = Matrix::zeros(len, n);
    let mut residuals = Matrix::zeros(len, n);
    let mut correlations = Vec::with_capacity(len);
    let mut var: Vec<f64> = marginals.iter().map(|m| m.unconditional_variance()).collect();
    let mut q = params.qbar.clone();
    let mut eta = vec![0.0; n];
    let mut z = vec![0.0; n];
    for t in 0..len {
        if t > 0 {
            q = step(params, &q, residuals.row(t - 1));
            for (i, m) in marginals.iter().enumerate() {
                let e = returns[(t - 1, i)] - m.mu;
                var[i] = m.omega + m.alpha * e * e + m.beta * var[i];
            }
        }
        let r = normalize(&q);
        let chol = cholesky(&r)?;
        eta.iter_mut().for_each(|v| *v = stream.next_gaussian());
        chol.lower_mul(&eta, &mut z);
        for i in 0..n {
            let s = var[i].sqrt();
            sigma[(t, i)] = s;
            residuals[(t, i)] = z[i];
            returns[(t, i)] = marginals[i].mu + s * z[i];
        }
        correlations.push(r);
    }
    Ok(DccSimulation { returns, sigma, residuals, correlations })
}
