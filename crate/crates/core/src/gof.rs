//! Goodness of fit and dependence diagnostics: copula log-likelihood,
//! information criteria, the two-sample energy distance, rank correlations
//! and a family comparison report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::{
    average_ranks, fit_copula_with, fit_pairwise, pair_tail_dependence, sample_copula, CopulaError, CopulaFit,
    CopulaSpec, DensityEvaluator, Family, FitOptions, PairFit, PseudoObservations,
};
use crate::mathcore::{Matrix, RandomStream};

/// Floor applied to log densities that underflow.
pub const LN_DENSITY_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Default cap on sample sizes entering the quadratic energy terms.
pub const ENERGY_CAP: usize = 5000;

#[derive(Debug, Error)]
pub enum GofError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error(transparent)]
    Copula(#[from] CopulaError),
}

/// Sum of log densities with the number of floored rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loglik {
    pub value: f64,
    pub floored_rows: usize,
}

/// `sum_i ln c(u_i)`; rows whose density underflows contribute `ln(1e-300)`.
pub fn copula_loglik(spec: &CopulaSpec, pobs: &PseudoObservations) -> Result<f64, GofError> {
    copula_loglik_detailed(spec, pobs).map(|l| l.value)
}

pub fn copula_loglik_detailed(spec: &CopulaSpec, pobs: &PseudoObservations) -> Result<Loglik, GofError> {
    if spec.dim() != pobs.dim() {
        return Err(GofError::Dimension(format!("{}-dim copula on {}-dim observations", spec.dim(), pobs.dim())));
    }
    let eval = DensityEvaluator::new(spec)?;
    let mut scratch = Vec::new();
    let mut out = Loglik { value: 0.0, floored_rows: 0 };
    for i in 0..pobs.n_obs() {
        let v = eval.ln_density(pobs.row(i), &mut scratch);
        if v.is_nan() || v < LN_DENSITY_FLOOR {
            out.floored_rows += 1;
            out.value += LN_DENSITY_FLOOR;
        } else {
            out.value += v;
        }
    }
    if out.floored_rows > 0 {
        log::warn!("{} of {} rows floored at ln(1e-300) under {}", out.floored_rows, pobs.n_obs(), spec.family());
    }
    Ok(out)
}

/// `-2 loglik + 2 p`.
pub fn aic(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}

/// `-2 loglik + p ln k`.
pub fn bic(loglik: f64, n_params: usize, n_obs: f64) -> f64 {
    -2.0 * loglik + n_params as f64 * n_obs.ln()
}

/// Mean Euclidean distance over all ordered row pairs (including `i = j`).
fn mean_pair_distance(a: &Matrix, b: &Matrix) -> f64 {
    let total: f64 = (0..a.rows())
        .into_par_iter()
        .map(|i| {
            let ra = a.row(i);
            (0..b.rows())
                .map(|j| ra.iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .sum::<f64>()
        })
        .sum();
    total / (a.rows() * b.rows()) as f64
}

/// Two-sample energy distance
/// `2 E|X - Y| - E|X - X'| - E|Y - Y'|` with V-statistic means.
pub fn energy_distance(a: &Matrix, b: &Matrix) -> Result<f64, GofError> {
    if a.cols() != b.cols() {
        return Err(GofError::Dimension(format!("{} vs {} columns", a.cols(), b.cols())));
    }
    if a.rows() < 2 || b.rows() < 2 {
        return Err(GofError::TooFewObservations { needed: 2, got: a.rows().min(b.rows()) });
    }
    let cross = mean_pair_distance(a, b);
    let within_a = mean_pair_distance(a, a);
    let within_b = if a == b { within_a } else { mean_pair_distance(b, b) };
    Ok(2.0 * cross - within_a - within_b)
}

/// Random subset of `m` rows, order preserved.
fn subsample_rows(m: &Matrix, keep: usize, stream: &mut RandomStream) -> Matrix {
    if keep >= m.rows() {
        return m.clone();
    }
    let mut idx: Vec<usize> = (0..m.rows()).collect();
    for i in 0..keep {
        let j = i + stream.next_index(m.rows() - i);
        idx.swap(i, j);
    }
    let mut chosen = idx[..keep].to_vec();
    chosen.sort_unstable();
    Matrix::from_fn(keep, m.cols(), |r, c| m[(chosen[r], c)])
}

/// Energy distance between the observations and `m` draws from `spec`; both
/// samples are capped at [`ENERGY_CAP`] rows.
pub fn energy_score(
    pobs: &PseudoObservations,
    spec: &CopulaSpec,
    m: usize,
    stream: &mut RandomStream,
) -> Result<f64, GofError> {
    if spec.dim() != pobs.dim() {
        return Err(GofError::Dimension(format!("{}-dim copula on {}-dim observations", spec.dim(), pobs.dim())));
    }
    let model = sample_copula(spec, m.min(ENERGY_CAP), stream)?;
    let observed = subsample_rows(pobs.matrix(), ENERGY_CAP, stream);
    energy_distance(&observed, model.matrix())
}

/// Kendall's tau-b by merge-sort discordance counting, `O(n log n)`.
/// `None` when either series is constant or shorter than 2.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |run: u64| run * run.saturating_sub(1) / 2;
    let (mut x_ties, mut joint_ties) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                joint_ties += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            x_ties += pairs(run_x);
            joint_ties += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    x_ties += pairs(run_x);
    joint_ties += pairs(run_xy);

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut y_ties = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            y_ties += pairs(run_y);
            run_y = 1;
        }
    }
    y_ties += pairs(run_y);

    let total = pairs(n as u64);
    let (nx, ny) = (total - x_ties, total - y_ties);
    if nx == 0 || ny == 0 {
        return None;
    }
    let s = total as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * swaps as i64;
    Some(s as f64 / (nx as f64 * ny as f64).sqrt())
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo) + merge_count(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Spearman's rho: the rank-difference formula without ties, Pearson on
/// average ranks otherwise.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let distinct = |r: &[f64]| r.iter().all(|v| v.fract() == 0.0) && {
        let mut s = r.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[0] != w[1])
    };
    if distinct(&rx) && distinct(&ry) {
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        let nf = n as f64;
        Some(1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)))
    } else {
        crate::data::pearson(&rx, &ry)
    }
}

/// Pearson, Spearman and Kendall coefficients; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelations {
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

pub fn rank_correlations(x: &[f64], y: &[f64]) -> Result<RankCorrelations, GofError> {
    if x.len() != y.len() {
        return Err(GofError::Dimension(format!("series lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(GofError::TooFewObservations { needed: 2, got: x.len() });
    }
    Ok(RankCorrelations { pearson: crate::data::pearson(x, y), spearman: spearman(x, y), kendall: kendall_tau(x, y) })
}

/// How a family was fitted for the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// One copula over all columns.
    Panel,
    /// A separate bivariate copula per column pair; likelihoods and
    /// parameter counts are summed over pairs.
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankKey {
    #[default]
    Aic,
    Bic,
    Loglik,
    Energy,
}

/// Dependence metrics for one column pair under a fitted model. Correlations
/// are measured on the model sample drawn for the energy score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub i: usize,
    pub j: usize,
    pub lower_tail: f64,
    pub upper_tail: f64,
    pub correlations: RankCorrelations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMetrics {
    pub scope: Scope,
    pub n_params: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub energy: Option<f64>,
    pub lower_tail: f64,
    pub upper_tail: f64,
    /// Pair means of the model-sample correlations.
    pub correlations: RankCorrelations,
    pub pairs: Vec<PairMetrics>,
    pub converged: bool,
    /// Panel spec, or one spec per pair in `pairs` order.
    pub specs: Vec<CopulaSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: Family,
    pub metrics: Option<FamilyMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub n_obs: usize,
    pub dim: usize,
    pub rank_by: RankKey,
    /// Ranked best first within scope: panel fits, pairwise fits, failures.
    pub rows: Vec<FamilyRow>,
    /// Empirical correlations of the observations for every pair.
    pub empirical: Vec<PairMetrics>,
}

impl GofReport {
    pub fn best(&self) -> Option<Family> {
        self.rows.first().filter(|r| r.metrics.is_some()).map(|r| r.family)
    }

    pub fn row(&self, family: Family) -> Option<&FamilyRow> {
        self.rows.iter().find(|r| r.family == family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub rank_by: RankKey,
    /// Compute energy scores (the quadratic cost dominates for large samples).
    pub energy: bool,
    /// Model draws per family, capped at [`ENERGY_CAP`].
    pub model_draws: usize,
    pub seed: u64,
    /// Fit every family pairwise instead of over the whole panel.
    pub pairwise: bool,
    pub fit: FitOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { rank_by: RankKey::Aic, energy: true, model_draws: ENERGY_CAP, seed: 0, pairwise: false, fit: FitOptions::default() }
    }
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<f64>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn mean_correlations(pairs: &[PairMetrics]) -> RankCorrelations {
    RankCorrelations {
        pearson: mean_opt(pairs.iter().map(|p| p.correlations.pearson)),
        spearman: mean_opt(pairs.iter().map(|p| p.correlations.spearman)),
        kendall: mean_opt(pairs.iter().map(|p| p.correlations.kendall)),
    }
}

fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn column(m: &Matrix, j: usize) -> Vec<f64> {
    (0..m.rows()).map(|i| m[(i, j)]).collect()
}

fn pair_metrics(spec: &CopulaSpec, sample: &Matrix, i: usize, j: usize, si: usize, sj: usize) -> Result<PairMetrics, GofError> {
    let td = pair_tail_dependence(spec, si, sj);
    Ok(PairMetrics {
        i,
        j,
        lower_tail: td.lower,
        upper_tail: td.upper,
        correlations: rank_correlations(&column(sample, si), &column(sample, sj))?,
    })
}

fn assemble(
    scope: Scope,
    n_obs: usize,
    n_params: usize,
    loglik: f64,
    energy: Option<f64>,
    pairs: Vec<PairMetrics>,
    converged: bool,
    specs: Vec<CopulaSpec>,
) -> FamilyMetrics {
    let np = pairs.len().max(1) as f64;
    FamilyMetrics {
        scope,
        n_params,
        loglik,
        aic: aic(loglik, n_params),
        bic: bic(loglik, n_params, n_obs as f64),
        energy,
        lower_tail: pairs.iter().map(|p| p.lower_tail).sum::<f64>() / np,
        upper_tail: pairs.iter().map(|p| p.upper_tail).sum::<f64>() / np,
        correlations: mean_correlations(&pairs),
        pairs,
        converged,
        specs,
    }
}

fn evaluate_panel(pobs: &PseudoObservations, fit: &CopulaFit, opts: &CompareOptions, stream: &mut RandomStream) -> Result<FamilyMetrics, GofError> {
    let sample = sample_copula(&fit.spec, opts.model_draws.clamp(2, ENERGY_CAP), stream)?;
    let energy = if opts.energy {
        let observed = subsample_rows(pobs.matrix(), ENERGY_CAP, stream);
        Some(energy_distance(&observed, sample.matrix())?)
    } else {
        None
    };
    let pairs = pair_list(pobs.dim())
        .into_iter()
        .map(|(i, j)| pair_metrics(&fit.spec, sample.matrix(), i, j, i, j))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(Scope::Panel, pobs.n_obs(), fit.spec.n_params(), fit.loglik, energy, pairs, fit.converged, vec![fit.spec.clone()]))
}

fn evaluate_pairs(pobs: &PseudoObservations, fits: &[PairFit], opts: &CompareOptions, stream: &RandomStream) -> Result<FamilyMetrics, GofError> {
    let per_pair = fits
        .par_iter()
        .map(|pf| {
            let mut s = stream.fork(((pf.i as u64) << 32) | pf.j as u64);
            let sample = sample_copula(&pf.fit.spec, opts.model_draws.clamp(2, ENERGY_CAP), &mut s)?;
            let energy = if opts.energy {
                let observed = subsample_rows(pobs.pair(pf.i, pf.j).matrix(), ENERGY_CAP, &mut s);
                Some(energy_distance(&observed, sample.matrix())?)
            } else {
                None
            };
            Ok((pair_metrics(&pf.fit.spec, sample.matrix(), pf.i, pf.j, 0, 1)?, energy))
        })
        .collect::<Result<Vec<_>, GofError>>()?;
    let energy = if opts.energy {
        Some(per_pair.iter().map(|(_, e)| e.unwrap_or(0.0)).sum::<f64>() / per_pair.len().max(1) as f64)
    } else {
        None
    };
    let loglik = fits.iter().map(|p| p.fit.loglik).sum();
    let n_params = fits.iter().map(|p| p.fit.spec.n_params()).sum();
    let converged = fits.iter().all(|p| p.fit.converged);
    let specs = fits.iter().map(|p| p.fit.spec.clone()).collect();
    Ok(assemble(Scope::Pairwise, pobs.n_obs(), n_params, loglik, energy, per_pair.into_iter().map(|(m, _)| m).collect(), converged, specs))
}

fn evaluate_family(pobs: &PseudoObservations, family: Family, opts: &CompareOptions) -> Result<FamilyMetrics, GofError> {
    let stream = RandomStream::new(opts.seed, 0x6f66).fork(family as u64);
    // multivariate Gumbel falls back to pairwise fits
    let pairwise = opts.pairwise || (family == Family::Gumbel && pobs.dim() > 2);
    if pairwise {
        let fits = fit_pairwise(pobs, family, &opts.fit)?;
        evaluate_pairs(pobs, &fits, opts, &stream)
    } else {
        let fit = fit_copula_with(pobs, family, &opts.fit)?;
        evaluate_panel(pobs, &fit, opts, &mut stream.clone())
    }
}

fn rank_value(m: &FamilyMetrics, key: RankKey) -> f64 {
    match key {
        RankKey::Aic => m.aic,
        RankKey::Bic => m.bic,
        RankKey::Loglik => -m.loglik,
        RankKey::Energy => m.energy.unwrap_or(f64::INFINITY),
    }
}

/// Fits and scores every family; a failing family is recorded in its row.
pub fn compare_families(pobs: &PseudoObservations, families: &[Family], opts: &CompareOptions) -> GofReport {
    let mut rows: Vec<FamilyRow> = families
        .iter()
        .map(|&family| match evaluate_family(pobs, family, opts) {
            Ok(m) => FamilyRow { family, metrics: Some(m), error: None },
            Err(e) => {
                log::warn!("{family} copula comparison failed: {e}");
                FamilyRow { family, metrics: None, error: Some(e.to_string()) }
            }
        })
        .collect();
    // summed pairwise likelihoods are not comparable with whole-panel ones,
    // so panel fits rank first, then pairwise fits, then failures
    rows.sort_by(|a, b| {
        let key = |r: &FamilyRow| match &r.metrics {
            Some(m) => (u8::from(m.scope == Scope::Pairwise), rank_value(m, opts.rank_by)),
            None => (2, f64::INFINITY),
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let empirical = pair_list(pobs.dim())
        .into_iter()
        .map(|(i, j)| PairMetrics {
            i,
            j,
            lower_tail: f64::NAN,
            upper_tail: f64::NAN,
            correlations: rank_correlations(&pobs.column(i), &pobs.column(j)).expect("equal lengths"),
        })
        .collect();
    GofReport { n_obs: pobs.n_obs(), dim: pobs.dim(), rank_by: opts.rank_by, rows, empirical }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::CorrelationMatrix;
    use proptest::prelude::*;

    fn brute_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (x[i] - x[j], y[i] - y[j]);
                if a == 0.0 {
                    tx += 1;
                }
                if b == 0.0 {
                    ty += 1;
                }
                if a != 0.0 && b != 0.0 {
                    if (a > 0.0) == (b > 0.0) {
                        c += 1;
                    } else {
                        d += 1;
                    }
                }
            }
        }
        let total = (n * (n - 1) / 2) as i64;
        let (nx, ny) = (total - tx, total - ty);
        if nx == 0 || ny == 0 {
            return None;
        }
        Some((c - d) as f64 / (nx as f64 * ny as f64).sqrt())
    }

    #[test]
    fn information_criteria() {
        assert_eq!(aic(100.0, 1), -198.0);
        assert!((bic(100.0, 1, std::f64::consts::E.powi(2)) + 198.0).abs() < 1e-12);
        assert_eq!(aic(100.0, 2) - aic(100.0, 1), 2.0);
    }

    #[test]
    fn kendall_hand_example() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert_eq!(kendall_tau(&x, &y), Some(0.6));
    }

    #[test]
    fn monotone_extremes() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = rank_correlations(&x, &x).unwrap();
        assert_eq!((r.pearson, r.spearman, r.kendall), (Some(1.0), Some(1.0), Some(1.0)));
        let r = rank_correlations(&x, &neg).unwrap();
        assert!((r.pearson.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!((r.spearman, r.kendall), (Some(-1.0), Some(-1.0)));
        let c = vec![2.0; 50];
        let r = rank_correlations(&x, &c).unwrap();
        assert_eq!((r.pearson, r.spearman, r.kendall), (None, None, None));
    }

    #[test]
    fn spearman_formula_and_ties() {
        // d = (0, -1, 1, -1, 1): 1 - 6 * 4 / 120
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert!((spearman(&x, &y).unwrap() - 0.8).abs() < 1e-15);
        let xt = [1.0, 1.0, 2.0, 3.0];
        let yt = [1.0, 2.0, 3.0, 4.0];
        let want = crate::data::pearson(&[1.5, 1.5, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(spearman(&xt, &yt), Some(want));
    }

    #[test]
    fn energy_identical_samples_is_zero() {
        let u = sample_copula(&CopulaSpec::clayton(2.0, 2).unwrap(), 500, &mut RandomStream::new(1, 0)).unwrap();
        assert_eq!(energy_distance(u.matrix(), u.matrix()).unwrap(), 0.0);
    }

    #[test]
    fn energy_null_and_power() {
        let ind = CopulaSpec::independence(2);
        let a = sample_copula(&ind, 2000, &mut RandomStream::new(1, 0)).unwrap();
        let null = energy_score(&a, &ind, 2000, &mut RandomStream::new(1, 1)).unwrap();
        assert!(null < 0.01 && null > -1e-12, "{null}");
        let c = sample_copula(&CopulaSpec::clayton(5.0, 2).unwrap(), 2000, &mut RandomStream::new(1, 2)).unwrap();
        let alt = energy_score(&c, &ind, 2000, &mut RandomStream::new(1, 3)).unwrap();
        assert!(alt > 5.0 * null.max(1e-3), "{alt} vs {null}");
    }

    #[test]
    fn loglik_independence_and_ordering() {
        let spec = CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.5).unwrap());
        let u = sample_copula(&spec, 5000, &mut RandomStream::new(2, 0)).unwrap();
        assert_eq!(copula_loglik(&CopulaSpec::independence(2), &u).unwrap(), 0.0);
        assert!(copula_loglik(&spec, &u).unwrap() > 0.0);
        assert!(copula_loglik(&CopulaSpec::independence(3), &u).is_err());
    }

    #[test]
    fn loglik_single_row_matches_density() {
        let spec = CopulaSpec::clayton(2.0, 2).unwrap();
        let u = PseudoObservations::new(Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap()).unwrap();
        // d2C/dudv of (u^-2 + v^-2 - 1)^(-1/2) at (1/2, 1/2): 3 u^-3 v^-3 S^(-5/2), S = 7
        let want = (3.0 * 64.0 * 7f64.powf(-2.5)).ln();
        assert!((copula_loglik(&spec, &u).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn comparison_report_shape() {
        let spec = CopulaSpec::clayton(3.0, 2).unwrap();
        let u = sample_copula(&spec, 1500, &mut RandomStream::new(3, 0)).unwrap();
        let report = compare_families(&u, &Family::ALL, &CompareOptions { model_draws: 500, ..Default::default() });
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.best(), Some(Family::Clayton));
        let aics: Vec<f64> = report.rows.iter().map(|r| r.metrics.as_ref().unwrap().aic).collect();
        assert!(aics.windows(2).all(|w| w[0] <= w[1]));
        for r in &report.rows {
            let m = r.metrics.as_ref().unwrap();
            assert_eq!(m.aic, -2.0 * m.loglik + 2.0 * m.n_params as f64);
            assert!(m.energy.unwrap() >= 0.0);
        }
    }

    #[test]
    fn multivariate_gumbel_is_compared_pairwise() {
        let u = sample_copula(&CopulaSpec::gumbel(1.5, 3).unwrap(), 300, &mut RandomStream::new(4, 0)).unwrap();
        let opts = CompareOptions { energy: false, ..Default::default() };
        let report = compare_families(&u, &[Family::Gumbel, Family::Clayton], &opts);
        let g = report.row(Family::Gumbel).unwrap().metrics.as_ref().unwrap();
        assert_eq!(g.scope, Scope::Pairwise);
        assert_eq!(g.n_params, 3);
        assert_eq!(g.pairs.len(), 3);
        assert!(g.energy.is_none());
        // the pairwise composite likelihood ranks behind the panel fit
        assert_eq!(report.rows[0].family, Family::Clayton);
    }

    proptest! {
        #[test]
        fn kendall_matches_brute_force(
            pairs in prop::collection::vec((0i32..8, 0i32..8), 2..200)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            prop_assert_eq!(kendall_tau(&x, &y), brute_tau_b(&x, &y));
        }

        #[test]
        fn kendall_matches_brute_force_continuous(
            x in prop::collection::vec(-1e3f64..1e3, 1000),
            y in prop::collection::vec(-1e3f64..1e3, 1000),
        ) {
            prop_assert_eq!(kendall_tau(&x, &y), brute_tau_b(&x, &y));
        }

        #[test]
        fn spearman_monotone_invariance(xi in prop::collection::vec(-300i32..300, 3..80), yi in prop::collection::vec(-300i32..300, 3..80)) {
            let n = xi.len().min(yi.len());
            let x: Vec<f64> = xi[..n].iter().map(|&v| v as f64 / 10.0).collect();
            let y: Vec<f64> = yi[..n].iter().map(|&v| v as f64 / 10.0).collect();
            let fx: Vec<f64> = x.iter().map(|v| (v / 5.0).exp()).collect();
            let fy: Vec<f64> = y.iter().map(|v| v * v * v + v).collect();
            prop_assert_eq!(spearman(&x, &y), spearman(&fx, &fy));
        }

        #[test]
        fn energy_is_symmetric_and_nonnegative(seed in 0u64..50) {
            let a = sample_copula(&CopulaSpec::clayton(1.0, 2).unwrap(), 60, &mut RandomStream::new(seed, 0)).unwrap();
            let b = sample_copula(&CopulaSpec::independence(2), 80, &mut RandomStream::new(seed, 1)).unwrap();
            let ab = energy_distance(a.matrix(), b.matrix()).unwrap();
            let ba = energy_distance(b.matrix(), a.matrix()).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab >= -1e-12);
        }
    }
}
