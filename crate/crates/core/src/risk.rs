//! Monte-Carlo tail risk on the fitted model: VaR, CVaR, CoVaR, ΔCoVaR,
//! systemic impact, stress tables and portfolio aggregation.
//!
//! Risk figures are signed return quantiles and tail means, so more negative
//! means worse. VaR is the lower empirical quantile (the order statistic at
//! `ceil(alpha N)`) and CVaR the mean of the `ceil(alpha N)` lowest scenarios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::{CopulaError, CopulaSpec, RowSampler};
use crate::dcc::DccFit;
use crate::garch::{forecast_sigma, GarchFit, Innovation};
use crate::mathcore::{CorrelationMatrix, MathError, Matrix, RandomStream};

/// Scenarios per independently seeded chunk. Fixed so that results do not
/// depend on the number of worker threads.
pub const CHUNK_SIZE: usize = 16_384;

/// Minimum size of the stress subsample behind each CoVaR.
pub const MIN_STRESS_SCENARIOS: usize = 1000;

pub const MIN_SCENARIOS: usize = 100;

/// Label of the weighted portfolio in reports.
pub const PORTFOLIO_LABEL: &str = "High-Corr Portfolio";

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("significance level {0} must lie in (0, 0.5)")]
    InvalidAlpha(f64),
    #[error("need at least {needed} scenarios, got {got}")]
    TooFewScenarios { needed: usize, got: usize },
    #[error("invalid portfolio weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty stress set for {0}")]
    EmptyStressSet(String),
    #[error("ΔCoVaR identity violated in row {0}")]
    Identity(String),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Maps a uniform to a standardized innovation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalTransform {
    /// Linear interpolation between sorted standardized residuals placed at
    /// `i / (k + 1)`, flat beyond the extremes.
    Empirical { sorted: Vec<f64> },
    /// Quantile of the fitted innovation distribution.
    Parametric { innovation: Innovation },
}

impl MarginalTransform {
    pub fn empirical(residuals: &[f64]) -> Result<Self, RiskError> {
        if residuals.len() < 2 || residuals.iter().any(|v| !v.is_finite()) {
            return Err(RiskError::Dimension("empirical transform needs at least 2 finite residuals".into()));
        }
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self::Empirical { sorted })
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Parametric { innovation } => innovation.quantile(p),
            Self::Empirical { sorted } => {
                let k = sorted.len();
                let h = p * (k + 1) as f64;
                if h <= 1.0 {
                    return sorted[0];
                }
                if h >= k as f64 {
                    return sorted[k - 1];
                }
                let lo = h.floor() as usize;
                let frac = h - lo as f64;
                sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
            }
        }
    }
}

/// Which marginal transform to build from GARCH fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalKind {
    #[default]
    Empirical,
    /// The fitted innovation law (Student-t unless the GARCH fit was Gaussian).
    #[serde(rename = "student-t", alias = "parametric")]
    Parametric,
}

/// Next-period return law of one asset: `mu + sigma * Q(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub asset_id: String,
    pub mu: f64,
    /// One-step-ahead conditional volatility.
    pub sigma: f64,
    pub transform: MarginalTransform,
}

impl Marginal {
    pub fn gaussian(asset_id: impl Into<String>, mu: f64, sigma: f64) -> Self {
        Self { asset_id: asset_id.into(), mu, sigma, transform: MarginalTransform::Parametric { innovation: Innovation::Gaussian } }
    }

    pub fn return_at(&self, u: f64) -> f64 {
        self.mu + self.sigma * self.transform.quantile(u)
    }
}

/// Marginals coupled by a copula; elliptical copulas carry the
/// one-step-ahead DCC correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub marginals: Vec<Marginal>,
    pub copula: CopulaSpec,
}

impl FittedModel {
    pub fn new(marginals: Vec<Marginal>, copula: CopulaSpec) -> Result<Self, RiskError> {
        if marginals.len() != copula.dim() {
            return Err(RiskError::Dimension(format!("{} marginals for a {}-dim copula", marginals.len(), copula.dim())));
        }
        if let Some(m) = marginals.iter().find(|m| !(m.sigma > 0.0 && m.sigma.is_finite() && m.mu.is_finite())) {
            return Err(RiskError::Dimension(format!("asset {} has invalid location/scale", m.asset_id)));
        }
        Ok(Self { marginals, copula })
    }

    /// Builds the model from per-asset GARCH fits, an optional DCC fit whose
    /// forecast replaces the correlation of an elliptical copula, and the
    /// chosen marginal transform.
    pub fn from_fits(
        asset_ids: &[String],
        garch: &[GarchFit],
        dcc: Option<&DccFit>,
        copula: CopulaSpec,
        kind: MarginalKind,
    ) -> Result<Self, RiskError> {
        if asset_ids.len() != garch.len() {
            return Err(RiskError::Dimension(format!("{} asset ids for {} GARCH fits", asset_ids.len(), garch.len())));
        }
        let marginals = asset_ids
            .iter()
            .zip(garch)
            .map(|(id, fit)| {
                let transform = match kind {
                    MarginalKind::Empirical => MarginalTransform::empirical(&fit.residuals)?,
                    MarginalKind::Parametric => MarginalTransform::Parametric { innovation: fit.params.innovation },
                };
                Ok(Marginal { asset_id: id.clone(), mu: fit.params.mu, sigma: forecast_sigma(fit, 1)[0], transform })
            })
            .collect::<Result<Vec<_>, RiskError>>()?;
        let copula = match (dcc, copula.family().is_elliptical()) {
            (Some(d), true) => {
                let corr = match CorrelationMatrix::new(d.forecast.clone()) {
                    Ok(c) => c,
                    Err(_) => CorrelationMatrix::repair(&d.forecast)?.0,
                };
                copula.with_correlation(corr)?
            }
            _ => copula,
        };
        Self::new(marginals, copula)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn asset_ids(&self) -> Vec<String> {
        self.marginals.iter().map(|m| m.asset_id.clone()).collect()
    }
}

/// `n x dim` matrix of next-period return scenarios. Chunk `c` draws from
/// `stream.fork(c)`.
pub fn simulate_joint(model: &FittedModel, n: usize, stream: &RandomStream) -> Result<Matrix, RiskError> {
    let d = model.dim();
    let mut data = vec![0.0; n * d];
    // validates the spec before the parallel section
    RowSampler::new(&model.copula)?;
    data.par_chunks_mut(CHUNK_SIZE * d).enumerate().for_each(|(c, chunk)| {
        let mut s = stream.fork(c as u64);
        let mut sampler = RowSampler::new(&model.copula).expect("validated above");
        let mut u = vec![0.0; d];
        for row in chunk.chunks_mut(d) {
            sampler.draw(&mut s, &mut u);
            for (j, r) in row.iter_mut().enumerate() {
                *r = model.marginals[j].return_at(u[j]);
            }
        }
    });
    Ok(Matrix::from_vec(n, d, data)?)
}

fn check_alpha(alpha: f64) -> Result<(), RiskError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(RiskError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Number of scenarios in the lower `alpha` tail: `ceil(alpha N)`, at least 1.
pub fn tail_count(alpha: f64, n: usize) -> usize {
    // the small slack keeps exact products such as 0.05 * 100 from rounding up
    ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Lower empirical quantile and tail mean of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRisk {
    pub var: f64,
    pub cvar: f64,
    pub n: usize,
    /// Scenarios averaged into the CVaR.
    pub tail_count: usize,
    /// Fewer than 10 expected tail scenarios.
    pub unstable: bool,
}

fn lower_tail(values: &mut [f64], alpha: f64) -> (f64, f64, usize) {
    let m = tail_count(alpha, values.len());
    let (lower, kth, _) = values.select_nth_unstable_by(m - 1, f64::total_cmp);
    let var = *kth;
    // averaging excesses over the VaR keeps a constant tail exact
    let excess: f64 = lower.iter().map(|x| x - var).sum();
    (var, (var + excess / m as f64).min(var), m)
}

/// VaR and CVaR of one scenario series.
pub fn var_cvar(scenarios: &[f64], alpha: f64) -> Result<TailRisk, RiskError> {
    check_alpha(alpha)?;
    if scenarios.len() < MIN_SCENARIOS {
        return Err(RiskError::TooFewScenarios { needed: MIN_SCENARIOS, got: scenarios.len() });
    }
    let mut v = scenarios.to_vec();
    let (var, cvar, m) = lower_tail(&mut v, alpha);
    let unstable = alpha * (scenarios.len() as f64) < 10.0;
    if unstable {
        log::warn!("only {} expected tail scenarios at alpha {alpha}; VaR/CVaR unstable", alpha * scenarios.len() as f64);
    }
    Ok(TailRisk { var, cvar, n: scenarios.len(), tail_count: m, unstable })
}

/// Checks that weights are nonnegative and sum to one.
pub fn validate_weights(weights: &[f64], dim: usize) -> Result<(), RiskError> {
    if weights.len() != dim {
        return Err(RiskError::InvalidWeights(format!("{} weights for {dim} assets", weights.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(RiskError::InvalidWeights(format!("weights must be finite and nonnegative: {weights:?}")));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(RiskError::InvalidWeights(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

pub fn equal_weights(dim: usize) -> Vec<f64> {
    vec![1.0 / dim as f64; dim]
}

/// A single asset or a weighted portfolio of the scenario columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leg {
    Asset(usize),
    Portfolio(Vec<f64>),
}

impl Leg {
    pub fn series(&self, scenarios: &Matrix) -> Result<Vec<f64>, RiskError> {
        let d = scenarios.cols();
        match self {
            Leg::Asset(j) if *j < d => Ok(scenarios.column(*j)),
            Leg::Asset(j) => Err(RiskError::Dimension(format!("asset index {j} out of range for {d} assets"))),
            Leg::Portfolio(w) => {
                validate_weights(w, d)?;
                Ok(scenarios.as_slice().chunks(d).map(|r| r.iter().zip(w).map(|(x, w)| x * w).sum()).collect())
            }
        }
    }

    pub fn label(&self, asset_ids: &[String]) -> String {
        match self {
            Leg::Asset(j) => asset_ids.get(*j).cloned().unwrap_or_else(|| format!("asset {j}")),
            Leg::Portfolio(_) => PORTFOLIO_LABEL.to_string(),
        }
    }
}

/// Portfolio VaR and CVaR on a scenario matrix.
pub fn portfolio_risk(scenarios: &Matrix, weights: &[f64], alpha: f64) -> Result<TailRisk, RiskError> {
    var_cvar(&Leg::Portfolio(weights.to_vec()).series(scenarios)?, alpha)
}

/// Target risk conditional on the conditioning leg being at or below its VaR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarRow {
    pub target: String,
    pub conditioning: String,
    pub var: f64,
    pub covar: f64,
    /// `covar - var`.
    pub delta_covar: f64,
    pub stress_count: usize,
}

/// CoVaR of `target` given `{conditioning <= VaR(conditioning)}` on fixed scenarios.
pub fn covar_on(
    scenarios: &Matrix,
    target: &Leg,
    conditioning: &Leg,
    alpha: f64,
    asset_ids: &[String],
) -> Result<CovarRow, RiskError> {
    let t = target.series(scenarios)?;
    let c = conditioning.series(scenarios)?;
    covar_series(&t, &c, alpha, target.label(asset_ids), conditioning.label(asset_ids))
}

fn covar_series(t: &[f64], c: &[f64], alpha: f64, target: String, conditioning: String) -> Result<CovarRow, RiskError> {
    let var = var_cvar(t, alpha)?.var;
    let cond_var = var_cvar(c, alpha)?.var;
    let mut stressed: Vec<f64> = t.iter().zip(c).filter(|(_, c)| **c <= cond_var).map(|(t, _)| *t).collect();
    if stressed.is_empty() {
        return Err(RiskError::EmptyStressSet(format!("{target} given {conditioning}")));
    }
    let stress_count = stressed.len();
    let (covar, _, _) = lower_tail(&mut stressed, alpha);
    Ok(CovarRow { target, conditioning, var, covar, delta_covar: covar - var, stress_count })
}

/// Sum of the ΔCoVaR column.
pub fn systemic_impact(rows: &[CovarRow]) -> f64 {
    rows.iter().map(|r| r.delta_covar).sum()
}

/// Rows sharing one conditioning leg, with their systemic impact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarTable {
    pub conditioning: String,
    pub rows: Vec<CovarRow>,
    pub systemic_impact: f64,
}

impl CovarTable {
    pub fn new(conditioning: String, rows: Vec<CovarRow>) -> Result<Self, RiskError> {
        let table = Self { conditioning, systemic_impact: systemic_impact(&rows), rows };
        table.check_identity()?;
        Ok(table)
    }

    /// Every row satisfies `ΔCoVaR = CoVaR - VaR` exactly.
    pub fn check_identity(&self) -> Result<(), RiskError> {
        match self.rows.iter().find(|r| r.delta_covar != r.covar - r.var) {
            Some(r) => Err(RiskError::Identity(format!("{} given {}", r.target, r.conditioning))),
            None => Ok(()),
        }
    }
}

/// Stress table for one conditioning asset over every other asset.
pub fn stress_test_on(scenarios: &Matrix, conditioning: usize, alpha: f64, asset_ids: &[String]) -> Result<CovarTable, RiskError> {
    let cond = Leg::Asset(conditioning);
    let rows = (0..scenarios.cols())
        .filter(|&j| j != conditioning)
        .map(|j| covar_on(scenarios, &Leg::Asset(j), &cond, alpha, asset_ids))
        .collect::<Result<Vec<_>, _>>()?;
    CovarTable::new(cond.label(asset_ids), rows)
}

/// Scenario count large enough for a stress subsample of at least
/// [`MIN_STRESS_SCENARIOS`].
pub fn scenarios_for_covar(n: usize, alpha: f64) -> usize {
    n.max((MIN_STRESS_SCENARIOS as f64 / alpha).ceil() as usize)
}

/// CoVaR on freshly simulated scenarios.
pub fn covar(
    model: &FittedModel,
    target: &Leg,
    conditioning: &Leg,
    alpha: f64,
    n: usize,
    stream: &RandomStream,
) -> Result<CovarRow, RiskError> {
    check_alpha(alpha)?;
    let scen = simulate_joint(model, scenarios_for_covar(n, alpha), stream)?;
    covar_on(&scen, target, conditioning, alpha, &model.asset_ids())
}

/// Stress table on freshly simulated scenarios.
pub fn stress_test(model: &FittedModel, conditioning: usize, alpha: f64, n: usize, stream: &RandomStream) -> Result<CovarTable, RiskError> {
    check_alpha(alpha)?;
    let scen = simulate_joint(model, scenarios_for_covar(n, alpha), stream)?;
    stress_test_on(&scen, conditioning, alpha, &model.asset_ids())
}

/// What the per-asset CoVaR table conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarConditioning {
    /// The weighted portfolio being in its own tail.
    #[default]
    Portfolio,
    /// One asset being in its own tail.
    Asset(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskOptions {
    pub alpha: f64,
    pub n_scenarios: usize,
    pub seed: u64,
    /// Portfolio weights; equal weights when absent.
    pub weights: Option<Vec<f64>>,
    pub conditioning: CovarConditioning,
}

impl Default for RiskOptions {
    fn default() -> Self {
        Self { alpha: 0.05, n_scenarios: 1_000_000, seed: 0, weights: None, conditioning: CovarConditioning::Portfolio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRisk {
    pub asset: String,
    #[serde(flatten)]
    pub risk: TailRisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub alpha: f64,
    pub n_scenarios: usize,
    pub seed: u64,
    pub weights: Vec<f64>,
    /// Per-asset VaR and CVaR.
    pub assets: Vec<AssetRisk>,
    pub portfolio: AssetRisk,
    /// Per-asset CoVaR under the configured conditioning.
    pub covar: CovarTable,
    /// One table per conditioning asset.
    pub stress: Vec<CovarTable>,
}

/// Simulates once and computes every risk table from the same scenarios.
pub fn risk_report(model: &FittedModel, opts: &RiskOptions) -> Result<RiskReport, RiskError> {
    check_alpha(opts.alpha)?;
    let d = model.dim();
    let weights = opts.weights.clone().unwrap_or_else(|| equal_weights(d));
    validate_weights(&weights, d)?;
    let n = scenarios_for_covar(opts.n_scenarios, opts.alpha);
    let ids = model.asset_ids();
    let scen = simulate_joint(model, n, &RandomStream::new(opts.seed, 0))?;
    let alpha = opts.alpha;

    let columns: Vec<Vec<f64>> = (0..d).map(|j| scen.column(j)).collect();
    let assets = columns
        .iter()
        .zip(&ids)
        .map(|(c, id)| Ok(AssetRisk { asset: id.clone(), risk: var_cvar(c, alpha)? }))
        .collect::<Result<Vec<_>, RiskError>>()?;
    let port_leg = Leg::Portfolio(weights.clone());
    let port_series = port_leg.series(&scen)?;
    let portfolio = AssetRisk { asset: PORTFOLIO_LABEL.to_string(), risk: var_cvar(&port_series, alpha)? };

    let (cond_series, cond_label, skip) = match opts.conditioning {
        CovarConditioning::Portfolio => (port_series, PORTFOLIO_LABEL.to_string(), None),
        CovarConditioning::Asset(i) => {
            let leg = Leg::Asset(i);
            (leg.series(&scen)?, leg.label(&ids), Some(i))
        }
    };
    let covar_rows = (0..d)
        .filter(|&j| Some(j) != skip)
        .map(|j| covar_series(&columns[j], &cond_series, alpha, ids[j].clone(), cond_label.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let covar = CovarTable::new(cond_label, covar_rows)?;

    let stress = (0..d)
        .map(|i| {
            let rows = (0..d)
                .filter(|&j| j != i)
                .map(|j| covar_series(&columns[j], &columns[i], alpha, ids[j].clone(), ids[i].clone()))
                .collect::<Result<Vec<_>, _>>()?;
            CovarTable::new(ids[i].clone(), rows)
        })
        .collect::<Result<Vec<_>, RiskError>>()?;

    Ok(RiskReport { alpha, n_scenarios: n, seed: opts.seed, weights, assets, portfolio, covar, stress })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::pearson;
    use proptest::prelude::*;

    fn normal_model(dim: usize, copula: CopulaSpec) -> FittedModel {
        let m = (0..dim).map(|j| Marginal::gaussian(format!("A{j}"), 0.0, 1.0)).collect();
        FittedModel::new(m, copula).unwrap()
    }

    #[test]
    fn degenerate_and_hand_examples() {
        let c = vec![0.3; 200];
        let r = var_cvar(&c, 0.05).unwrap();
        assert_eq!((r.var, r.cvar), (0.3, 0.3));
        let mut x = vec![0.0; 100];
        x[37] = -10.0;
        let r = var_cvar(&x, 0.05).unwrap();
        // five tail scenarios: -10 and four zeros
        assert_eq!(r.tail_count, 5);
        assert_eq!(r.var, 0.0);
        assert_eq!(r.cvar, -2.0);
        let r = var_cvar(&x, 0.01).unwrap();
        assert_eq!((r.var, r.cvar), (-10.0, -10.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(var_cvar(&[0.0; 50], 0.05), Err(RiskError::TooFewScenarios { .. })));
        assert!(matches!(var_cvar(&[0.0; 500], 0.5), Err(RiskError::InvalidAlpha(_))));
        assert!(var_cvar(&[0.0; 150], 0.05).unwrap().unstable);
        assert!(validate_weights(&[0.5, 0.6], 2).is_err());
        assert!(validate_weights(&[1.5, -0.5], 2).is_err());
        assert!(validate_weights(&[0.5], 2).is_err());
        assert!(validate_weights(&[0.25, 0.75], 2).is_ok());
    }

    #[test]
    fn normal_var_and_expected_shortfall() {
        let mut s = RandomStream::new(42, 0);
        let x: Vec<f64> = (0..1_000_000).map(|_| s.next_gaussian()).collect();
        let r = var_cvar(&x, 0.05).unwrap();
        // q(0.05) and -phi(q)/0.05
        assert!((r.var + 1.6448536269514727).abs() < 0.01, "{}", r.var);
        assert!((r.cvar + 2.0627128075074260).abs() < 0.02, "{}", r.cvar);
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let spec = CopulaSpec::student_t(CorrelationMatrix::bivariate(0.5).unwrap(), 5.0).unwrap();
        let model = normal_model(2, spec);
        let a = simulate_joint(&model, 40_000, &RandomStream::new(1, 0)).unwrap();
        let b = simulate_joint(&model, 40_000, &RandomStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate_joint(&model, 40_000, &RandomStream::new(1, 0)).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn gaussian_copula_correlation_carries_through() {
        let model = normal_model(2, CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.9).unwrap()));
        let s = simulate_joint(&model, 100_000, &RandomStream::new(3, 0)).unwrap();
        let r = pearson(&s.column(0), &s.column(1)).unwrap();
        assert!((r - 0.9).abs() < 0.01, "{r}");
    }

    #[test]
    fn degenerate_weights_match_asset() {
        let model = normal_model(3, CopulaSpec::gaussian(CorrelationMatrix::exchangeable(3, 0.3).unwrap()));
        let s = simulate_joint(&model, 20_000, &RandomStream::new(4, 0)).unwrap();
        let p = portfolio_risk(&s, &[0.0, 1.0, 0.0], 0.05).unwrap();
        let a = var_cvar(&s.column(1), 0.05).unwrap();
        assert_eq!((p.var, p.cvar), (a.var, a.cvar));
    }

    #[test]
    fn diversification_and_comonotone_additivity() {
        let iid = normal_model(4, CopulaSpec::independence(4));
        let s = simulate_joint(&iid, 200_000, &RandomStream::new(5, 0)).unwrap();
        let p = portfolio_risk(&s, &equal_weights(4), 0.05).unwrap();
        let a = var_cvar(&s.column(0), 0.05).unwrap();
        assert!(p.var > a.var);

        let como = normal_model(2, CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.9999).unwrap()));
        let s = simulate_joint(&como, 200_000, &RandomStream::new(6, 0)).unwrap();
        let p = portfolio_risk(&s, &equal_weights(2), 0.05).unwrap();
        let a = var_cvar(&s.column(0), 0.05).unwrap();
        assert!((p.var - a.var).abs() < 0.01, "{} vs {}", p.var, a.var);
    }

    #[test]
    fn strong_dependence_deepens_covar() {
        // For a bivariate normal with correlation rho, the target given the
        // conditioning tail is rho * X + sqrt(1 - rho^2) * Z with X drawn from
        // the conditioning tail; rejection sampling of that law gives the oracle.
        let rho: f64 = 0.99;
        let model = normal_model(2, CopulaSpec::gaussian(CorrelationMatrix::bivariate(rho).unwrap()));
        let row = covar(&model, &Leg::Asset(1), &Leg::Asset(0), 0.05, 1_000_000, &RandomStream::new(7, 0)).unwrap();
        assert!(row.covar < row.var - 0.3, "{row:?}");

        let mut s = RandomStream::new(8, 0);
        let q = -1.6448536269514727;
        let mut stressed = Vec::new();
        while stressed.len() < 200_000 {
            let x = s.next_gaussian();
            if x <= q {
                stressed.push(rho * x + (1.0 - rho * rho).sqrt() * s.next_gaussian());
            }
        }
        let oracle = var_cvar(&stressed, 0.05).unwrap().var - q;
        assert!((row.delta_covar - oracle).abs() < 0.02, "{} vs {oracle}", row.delta_covar);
    }

    #[test]
    fn raises_scenarios_for_stress_subsample() {
        assert_eq!(scenarios_for_covar(100, 0.05), 20_000);
        assert_eq!(scenarios_for_covar(1_000_000, 0.05), 1_000_000);
        let model = normal_model(2, CopulaSpec::independence(2));
        let row = covar(&model, &Leg::Asset(0), &Leg::Asset(1), 0.05, 100, &RandomStream::new(1, 0)).unwrap();
        assert!(row.stress_count >= MIN_STRESS_SCENARIOS);
    }

    #[test]
    fn stress_table_shape_and_identity() {
        let model = normal_model(2, CopulaSpec::independence(2));
        let t = stress_test(&model, 0, 0.05, 100_000, &RandomStream::new(1, 0)).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.systemic_impact, t.rows[0].delta_covar);
        t.check_identity().unwrap();
    }

    #[test]
    fn systemic_impact_sums() {
        let row = |d: f64| CovarRow { target: "x".into(), conditioning: "y".into(), var: 0.0, covar: d, delta_covar: d, stress_count: 1 };
        assert_eq!(systemic_impact(&[row(0.1), row(-0.1)]), 0.0);
        assert_eq!(systemic_impact(&[row(0.25)]), 0.25);
    }

    #[test]
    fn report_is_consistent() {
        let model = normal_model(3, CopulaSpec::clayton(2.0, 3).unwrap());
        let opts = RiskOptions { n_scenarios: 30_000, seed: 9, ..Default::default() };
        let r = risk_report(&model, &opts).unwrap();
        assert_eq!(r.assets.len(), 3);
        assert_eq!(r.covar.rows.len(), 3);
        assert_eq!(r.stress.len(), 3);
        assert!(r.stress.iter().all(|t| t.rows.len() == 2));
        for a in r.assets.iter().chain([&r.portfolio]) {
            assert!(a.risk.cvar <= a.risk.var);
        }
        assert_eq!(r, risk_report(&model, &opts).unwrap());
        // positive dependence: conditioning on the portfolio tail deepens each asset's VaR
        assert!(r.covar.rows.iter().all(|row| row.delta_covar < 0.0));
    }

    #[test]
    fn empirical_transform_interpolates() {
        let t = MarginalTransform::empirical(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.quantile(0.25), 1.0);
        assert_eq!(t.quantile(0.5), 2.0);
        assert_eq!(t.quantile(0.625), 2.5);
        assert_eq!(t.quantile(0.01), 1.0);
        assert_eq!(t.quantile(0.99), 3.0);
    }

    proptest! {
        #[test]
        fn cvar_below_var_and_alpha_monotone(x in prop::collection::vec(-100.0f64..100.0, 100..400)) {
            let a = var_cvar(&x, 0.01).unwrap();
            let b = var_cvar(&x, 0.05).unwrap();
            prop_assert!(a.cvar <= a.var && b.cvar <= b.var);
            prop_assert!(a.var <= b.var);
        }

        #[test]
        fn delta_identity_holds(seed in 0u64..20) {
            let model = normal_model(3, CopulaSpec::gaussian(CorrelationMatrix::exchangeable(3, 0.4).unwrap()));
            let s = simulate_joint(&model, 5_000, &RandomStream::new(seed, 0)).unwrap();
            let ids = model.asset_ids();
            for i in 0..3 {
                let t = stress_test_on(&s, i, 0.05, &ids).unwrap();
                for r in &t.rows {
                    prop_assert_eq!(r.delta_covar, r.covar - r.var);
                }
            }
        }
    }
}
