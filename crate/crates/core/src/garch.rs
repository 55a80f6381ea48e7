//! GARCH(1,1) volatility: likelihood fitting, filtering, forecasting and
//! simulation, with ARCH(1) as the `beta = 0` restriction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mathcore::special::ln_gamma;
use crate::mathcore::{minimize, norm_cdf, norm_quantile, Bound, MathError, MinimizeOptions, RandomStream, StudentT};

/// Upper limit on `alpha + beta` used while fitting.
pub const MAX_PERSISTENCE: f64 = 0.9999;

/// Degrees-of-freedom grid profiled before the joint refinement.
pub const NU_GRID: [f64; 8] = [4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0];
const NU_BOUNDS: (f64, f64) = (2.05, 500.0);

#[derive(Debug, Error)]
pub enum GarchError {
    #[error("invalid GARCH parameters: {0}")]
    InvalidParams(String),
    #[error("need at least {needed} returns, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("returns are constant")]
    ConstantReturns,
    #[error("non-finite return at index {0}")]
    NonFinite(usize),
    #[error("optimizer failed: {0}")]
    Optimizer(#[from] MathError),
}

/// Distribution of the standardized innovations (mean 0, variance 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Innovation {
    Gaussian,
    /// Student-t rescaled to unit variance; requires `nu > 2`.
    StudentT { nu: f64 },
}

impl Innovation {
    fn validate(&self) -> Result<(), GarchError> {
        match *self {
            Innovation::StudentT { nu } if !(nu > 2.0) => {
                Err(GarchError::InvalidParams(format!("innovation degrees of freedom {nu} must exceed 2")))
            }
            _ => Ok(()),
        }
    }

    fn kernel(&self) -> LnDensity {
        match *self {
            Innovation::Gaussian => LnDensity { constant: -0.5 * (2.0 * PI).ln(), nu: f64::INFINITY },
            Innovation::StudentT { nu } => LnDensity {
                constant: ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (PI * (nu - 2.0)).ln(),
                nu,
            },
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        self.kernel().eval(z * z)
    }

    /// Scale turning a plain Student-t variate into a unit-variance one.
    fn t_scale(nu: f64) -> f64 {
        ((nu - 2.0) / nu).sqrt()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            Innovation::Gaussian => norm_cdf(z),
            Innovation::StudentT { nu } => {
                StudentT::new(nu).expect("validated nu").cdf(z / Self::t_scale(nu))
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Innovation::Gaussian => norm_quantile(p),
            Innovation::StudentT { nu } => StudentT::new(nu).expect("validated nu").quantile(p) * Self::t_scale(nu),
        }
    }

    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        match *self {
            Innovation::Gaussian => stream.next_gaussian(),
            Innovation::StudentT { nu } => {
                let z = stream.next_gaussian();
                let w = stream.next_chi_squared(nu) / nu;
                z / w.sqrt() * Self::t_scale(nu)
            }
        }
    }
}

/// `ln f(z)` as a function of `z^2`, with the normalizing constant cached.
#[derive(Debug, Clone, Copy)]
struct LnDensity {
    constant: f64,
    nu: f64,
}

impl LnDensity {
    fn eval(&self, z2: f64) -> f64 {
        if self.nu.is_infinite() {
            self.constant - 0.5 * z2
        } else {
            self.constant - 0.5 * (self.nu + 1.0) * (z2 / (self.nu - 2.0)).ln_1p()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub innovation: Innovation,
}

impl GarchParams {
    pub fn new(omega: f64, alpha: f64, beta: f64, mu: f64, innovation: Innovation) -> Result<Self, GarchError> {
        let p = Self { omega, alpha, beta, mu, innovation };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GarchError> {
        let ok = self.omega > 0.0
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta < 1.0
            && self.omega.is_finite()
            && self.mu.is_finite();
        if !ok {
            return Err(GarchError::InvalidParams(format!(
                "need omega > 0, alpha, beta >= 0, alpha + beta < 1; got omega={}, alpha={}, beta={}, mu={}",
                self.omega, self.alpha, self.beta, self.mu
            )));
        }
        self.innovation.validate()
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    /// Conditional standard deviations `sigma_t`, same length as the data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<f64>,
    /// Standardized residuals `(r_t - mu) / sigma_t`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<f64>,
    /// Last demeaned return `r_T - mu`, used by the one-step forecast.
    pub last_shock: f64,
    pub loglik: f64,
    pub converged: bool,
    /// True when fitted under the `beta = 0` restriction.
    #[serde(default)]
    pub arch_only: bool,
}

impl GarchFit {
    /// Rebuilds the filtered quantities for `returns` at fixed parameters.
    pub fn from_params(params: GarchParams, returns: &[f64], converged: bool) -> Result<Self, GarchError> {
        params.validate()?;
        if returns.is_empty() {
            return Err(GarchError::TooShort { needed: 1, got: 0 });
        }
        let sigma = filter_sigma(&params, returns)?;
        let residuals = returns.iter().zip(&sigma).map(|(r, s)| (r - params.mu) / s).collect();
        let loglik = garch_loglik(&params, returns)?;
        Ok(Self {
            params,
            sigma,
            residuals,
            last_shock: returns[returns.len() - 1] - params.mu,
            loglik,
            converged,
            arch_only: params.beta == 0.0,
        })
    }

    pub fn residual_variance(&self) -> f64 {
        let n = self.residuals.len() as f64;
        let m = self.residuals.iter().sum::<f64>() / n;
        self.residuals.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (n - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InnovationChoice {
    Gaussian,
    /// Student-t with profiled then refined degrees of freedom.
    StudentT,
    /// Student-t with degrees of freedom held fixed.
    StudentTFixed { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchOptions {
    pub innovation: InnovationChoice,
    /// Fit the `beta = 0` (ARCH(1)) restriction instead of the full model.
    pub arch_only: bool,
    /// Log-likelihood gain the `beta` term must earn over the ARCH(1) fit
    /// before the full model is preferred (half the 95% chi-square(1) point).
    pub beta_min_gain: f64,
    pub min_obs: usize,
    pub optimizer: MinimizeOptions,
}

impl Default for GarchOptions {
    fn default() -> Self {
        Self {
            innovation: InnovationChoice::StudentT,
            arch_only: false,
            beta_min_gain: 1.92,
            min_obs: 50,
            optimizer: MinimizeOptions::default(),
        }
    }
}

impl GarchOptions {
    pub fn gaussian() -> Self {
        Self { innovation: InnovationChoice::Gaussian, ..Self::default() }
    }
}

/// `sigma_1^2 = omega / (1 - alpha - beta)`,
/// `sigma_t^2 = omega + alpha (r_{t-1} - mu)^2 + beta sigma_{t-1}^2`.
pub fn filter_sigma(params: &GarchParams, returns: &[f64]) -> Result<Vec<f64>, GarchError> {
    params.validate()?;
    Ok(variance_path(params.omega, params.alpha, params.beta, params.mu, returns).into_iter().map(f64::sqrt).collect())
}

fn variance_path(omega: f64, alpha: f64, beta: f64, mu: f64, returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len());
    let mut var = omega / (1.0 - alpha - beta);
    for t in 0..returns.len() {
        if t > 0 {
            let e = returns[t - 1] - mu;
            var = omega + alpha * e * e + beta * var;
        }
        out.push(var);
    }
    out
}

/// Log-likelihood of `returns` under `params`.
pub fn garch_loglik(params: &GarchParams, returns: &[f64]) -> Result<f64, GarchError> {
    params.validate()?;
    let shocks: Vec<f64> = returns.iter().map(|r| r - params.mu).collect();
    Ok(loglik_demeaned(params.omega, params.alpha, params.beta, params.innovation.kernel(), &shocks))
}

fn loglik_demeaned(omega: f64, alpha: f64, beta: f64, density: LnDensity, shocks: &[f64]) -> f64 {
    let mut var = omega / (1.0 - alpha - beta);
    let mut ll = 0.0;
    let mut prev = 0.0;
    for (t, &e) in shocks.iter().enumerate() {
        if t > 0 {
            var = omega + alpha * prev * prev + beta * var;
        }
        ll += density.eval(e * e / var) - 0.5 * var.ln();
        prev = e;
    }
    ll
}

/// Standardized residuals of a fit.
pub fn standardized_residuals(fit: &GarchFit) -> &[f64] {
    &fit.residuals
}

/// Volatility forecasts `sigma_{T+1} .. sigma_{T+h}`.
pub fn forecast_sigma(fit: &GarchFit, horizon: usize) -> Vec<f64> {
    let p = &fit.params;
    let Some(&sigma_t) = fit.sigma.last() else { return vec![p.unconditional_variance().sqrt(); horizon] };
    let mut var = p.omega + p.alpha * fit.last_shock * fit.last_shock + p.beta * sigma_t * sigma_t;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        out.push(var.sqrt());
        var = p.omega + (p.alpha + p.beta) * var;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchSimulation {
    pub returns: Vec<f64>,
    pub sigma: Vec<f64>,
    pub innovations: Vec<f64>,
}

/// Simulates the model from its unconditional variance, matching the
/// initialization used by [`filter_sigma`].
pub fn simulate_garch(params: &GarchParams, len: usize, stream: &mut RandomStream) -> Result<GarchSimulation, GarchError> {
    params.validate()?;
    let mut sim = GarchSimulation {
        returns: Vec::with_capacity(len),
        sigma: Vec::with_capacity(len),
        innovations: Vec::with_capacity(len),
    };
    let mut var = params.unconditional_variance();
    let mut prev = 0.0;
    for t in 0..len {
        if t > 0 {
            var = params.omega + params.alpha * prev * prev + params.beta * var;
        }
        let z = params.innovation.sample(stream);
        let s = var.sqrt();
        prev = s * z;
        sim.returns.push(params.mu + prev);
        sim.sigma.push(s);
        sim.innovations.push(z);
    }
    Ok(sim)
}

/// Maximum-likelihood GARCH(1,1) fit with the mean fixed at the sample mean.
///
/// The variance parameters are optimized as `(ln omega, alpha + beta,
/// alpha / (alpha + beta))` on data scaled to unit variance, from several
/// starts including `alpha = 0.05, beta = 0.90`. The unrestricted fit is never
/// worse than the `beta = 0` fit on the same data.
pub fn fit_garch(returns: &[f64], opts: &GarchOptions) -> Result<GarchFit, GarchError> {
    let t = returns.len();
    if t < opts.min_obs.max(2) {
        return Err(GarchError::TooShort { needed: opts.min_obs.max(2), got: t });
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(GarchError::NonFinite(i));
    }
    let mu = returns.iter().sum::<f64>() / t as f64;
    let shocks: Vec<f64> = returns.iter().map(|r| r - mu).collect();
    let var = shocks.iter().map(|e| e * e).sum::<f64>() / t as f64;
    if !(var > 0.0) || var.sqrt() <= 1e-14 * mu.abs() {
        return Err(GarchError::ConstantReturns);
    }
    let scale = var.sqrt();
    let scaled: Vec<f64> = shocks.iter().map(|e| e / scale).collect();
    let problem = Problem { data: &scaled, opts };

    let start = Candidate { omega: 0.05, alpha: 0.05, beta: 0.90, nu: None };
    let mut best = match opts.innovation {
        InnovationChoice::Gaussian => problem.fit_fixed_nu(None, &start)?,
        InnovationChoice::StudentTFixed { nu } => {
            Innovation::StudentT { nu }.validate()?;
            problem.fit_fixed_nu(Some(nu), &start)?
        }
        InnovationChoice::StudentT => {
            let mut profiled: Option<Solved> = None;
            for nu in NU_GRID {
                let s = problem.fit_fixed_nu(Some(nu), &start)?;
                if profiled.as_ref().is_none_or(|p| s.nll < p.nll) {
                    profiled = Some(s);
                }
            }
            let profiled = profiled.expect("grid is non-empty");
            let joint = if profiled.candidate.beta == 0.0 {
                let arch_opts = GarchOptions { arch_only: true, ..*opts };
                Problem { data: &scaled, opts: &arch_opts }.solve(&profiled.candidate, true)?
            } else {
                problem.solve(&profiled.candidate, true)?
            };
            if joint.nll <= profiled.nll {
                joint
            } else {
                profiled
            }
        }
    };

    let innovation = best.candidate.nu.map_or(Innovation::Gaussian, |nu| Innovation::StudentT { nu });
    let mut params = GarchParams {
        omega: best.candidate.omega * var,
        alpha: best.candidate.alpha,
        beta: best.candidate.beta,
        mu,
        innovation,
    };
    let ll = garch_loglik(&params, returns)?;
    // The documented start point, evaluated on the original data, is a floor.
    let start_beta = if opts.arch_only { 0.0 } else { start.beta };
    let start_params = GarchParams {
        omega: (1.0 - start.alpha - start_beta) * var,
        alpha: start.alpha,
        beta: start_beta,
        mu,
        innovation,
    };
    let start_ll = garch_loglik(&start_params, returns)?;
    if start_ll > ll {
        params = start_params;
        best.converged = false;
    }
    let fit = GarchFit::from_params(params, returns, best.converged)?;
    let zvar = fit.residual_variance();
    if !(0.8..=1.2).contains(&zvar) {
        log::warn!("standardized residual variance {zvar:.3} is outside [0.8, 1.2]");
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    /// Intercept on the unit-variance scale.
    omega: f64,
    alpha: f64,
    beta: f64,
    nu: Option<f64>,
}

#[derive(Debug, Clone)]
struct Solved {
    candidate: Candidate,
    nll: f64,
    converged: bool,
}

struct Problem<'a> {
    data: &'a [f64],
    opts: &'a GarchOptions,
}

impl Problem<'_> {
    fn nll(&self, c: &Candidate) -> f64 {
        let density = c.nu.map_or(Innovation::Gaussian, |nu| Innovation::StudentT { nu }).kernel();
        let v = -loglik_demeaned(c.omega, c.alpha, c.beta, density, self.data);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    /// Several starts at fixed `nu`; with the full model, also the ARCH fit.
    fn fit_fixed_nu(&self, nu: Option<f64>, spec_start: &Candidate) -> Result<Solved, GarchError> {
        let mut starts = vec![Candidate { nu, ..*spec_start }];
        if !self.opts.arch_only {
            starts.push(Candidate { omega: 0.2, alpha: 0.10, beta: 0.70, nu });
            starts.push(Candidate { omega: 0.85, alpha: 0.05, beta: 0.10, nu });
        }
        let mut best: Option<Solved> = None;
        for s in &starts {
            let s = self.solve(&self.arch_adjusted(s), false)?;
            if best.as_ref().is_none_or(|b| s.nll < b.nll) {
                best = Some(s);
            }
        }
        let mut best = best.expect("at least one start");
        if !self.opts.arch_only {
            let arch_opts = GarchOptions { arch_only: true, ..*self.opts };
            let arch = Problem { data: self.data, opts: &arch_opts }.solve(
                &Candidate { omega: 0.95, alpha: 0.05, beta: 0.0, nu },
                false,
            )?;
            // beta is unidentified when alpha is near zero, so the restriction
            // wins unless the full model earns a significant likelihood gain
            let start_nll = self.nll(&self.arch_adjusted(&starts[0]));
            if arch.nll < best.nll + self.opts.beta_min_gain && arch.nll <= start_nll {
                best = arch;
            }
        }
        Ok(best)
    }

    fn arch_adjusted(&self, c: &Candidate) -> Candidate {
        if self.opts.arch_only {
            Candidate { omega: 1.0 - c.alpha, beta: 0.0, ..*c }
        } else {
            Candidate { omega: 1.0 - c.alpha - c.beta, ..*c }
        }
    }

    /// Minimizes the negative log-likelihood from `start`; `free_nu` adds the
    /// degrees of freedom as a parameter.
    fn solve(&self, start: &Candidate, free_nu: bool) -> Result<Solved, GarchError> {
        let arch = self.opts.arch_only;
        let nu_fixed = start.nu;
        let decode = |x: &[f64]| -> Candidate {
            let omega = x[0];
            let (alpha, beta, rest) = if arch {
                (x[1], 0.0, &x[2..])
            } else {
                let share = x[2];
                (x[1] * share, x[1] * (1.0 - share), &x[3..])
            };
            let nu = if free_nu { Some(rest[0]) } else { nu_fixed };
            Candidate { omega, alpha, beta, nu }
        };
        let mut x0 = vec![start.omega];
        let mut bounds = vec![Bound::Lower(0.0)];
        if arch {
            x0.push(start.alpha.clamp(1e-6, MAX_PERSISTENCE - 1e-6));
            bounds.push(Bound::Interval(0.0, MAX_PERSISTENCE));
        } else {
            let p = (start.alpha + start.beta).clamp(1e-6, MAX_PERSISTENCE - 1e-6);
            x0.push(p);
            x0.push((start.alpha / p).clamp(1e-6, 1.0 - 1e-6));
            bounds.push(Bound::Interval(0.0, MAX_PERSISTENCE));
            bounds.push(Bound::Interval(0.0, 1.0));
        }
        if free_nu {
            x0.push(start.nu.unwrap_or(8.0).clamp(NU_BOUNDS.0 + 1e-6, NU_BOUNDS.1 - 1e-6));
            bounds.push(Bound::Interval(NU_BOUNDS.0, NU_BOUNDS.1));
        }
        let m = minimize(|x| self.nll(&decode(x)), &x0, &bounds, &self.opts.optimizer)?;
        Ok(Solved { candidate: decode(&m.x), nll: m.fx, converged: m.converged() })
    }
}
