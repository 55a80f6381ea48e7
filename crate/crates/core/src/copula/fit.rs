//! Maximum pseudo-likelihood fitting.
//!
//! Correlation matrices are optimized through partial correlations in
//! (-1, 1), which map one-to-one onto valid correlation matrices through their
//! Cholesky rows, so the simplex never leaves the positive-definite cone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mathcore::{
    minimize, norm_quantile, Bound, Cholesky, CorrelationMatrix, Matrix, MinimizeOptions, StudentT,
};

use super::density::{
    clayton_constant, clayton_ln_density, gaussian_ln_density_scores, gumbel_ln_density, student_constant,
    student_ln_density_scores,
};
use super::{CopulaError, CopulaSpec, Family, PseudoObservations};

/// Degrees-of-freedom grid profiled before local refinement.
pub const STUDENT_NU_GRID: [f64; 9] = [3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_obs: usize,
    /// Search interval for the Student-t degrees of freedom.
    pub nu_bounds: (f64, f64),
    /// Polish elliptical correlation matrices by likelihood after the
    /// moment-based start.
    pub polish_correlation: bool,
    #[serde(skip)]
    pub optimizer: MinimizeOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_obs: 50,
            nu_bounds: (2.0, 500.0),
            polish_correlation: true,
            optimizer: MinimizeOptions { tol: 1e-7, max_evals: 20_000, initial_step: 0.05, restart: true, ..MinimizeOptions::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaFit {
    pub spec: CopulaSpec,
    /// Pseudo-log-likelihood at the returned parameters.
    pub loglik: f64,
    /// Log-likelihood at the moment-based starting point.
    pub start_loglik: f64,
    pub n_obs: usize,
    pub converged: bool,
}

impl CopulaFit {
    pub fn family(&self) -> Family {
        self.spec.family()
    }
}

/// Bivariate fit on coordinates `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub i: usize,
    pub j: usize,
    pub fit: CopulaFit,
}

/// Fits `family` with default options.
pub fn fit_copula(pobs: &PseudoObservations, family: Family) -> Result<CopulaFit, CopulaError> {
    fit_copula_with(pobs, family, &FitOptions::default())
}

pub fn fit_copula_with(pobs: &PseudoObservations, family: Family, opts: &FitOptions) -> Result<CopulaFit, CopulaError> {
    let (k, n) = (pobs.n_obs(), pobs.dim());
    if k < opts.min_obs.max(2) {
        return Err(CopulaError::TooFewObservations { needed: opts.min_obs.max(2), got: k });
    }
    if n < 2 {
        return Err(CopulaError::Dimension(format!("copula fitting needs at least 2 columns, got {n}")));
    }
    match family {
        Family::Gaussian => fit_gaussian(pobs, opts),
        Family::StudentT => fit_student(pobs, opts),
        Family::Clayton => fit_clayton(pobs, opts),
        Family::Gumbel => {
            if n != 2 {
                return Err(CopulaError::UnsupportedDimension { family, dim: n });
            }
            fit_gumbel(pobs, opts)
        }
    }
}

/// Fits `family` separately on every coordinate pair `i < j`.
pub fn fit_pairwise(pobs: &PseudoObservations, family: Family, opts: &FitOptions) -> Result<Vec<PairFit>, CopulaError> {
    let n = pobs.dim();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs
        .into_par_iter()
        .map(|(i, j)| fit_copula_with(&pobs.pair(i, j), family, opts).map(|fit| PairFit { i, j, fit }))
        .collect()
}

fn score_matrix(pobs: &PseudoObservations, quantile: impl Fn(f64) -> f64) -> Matrix {
    Matrix::from_fn(pobs.n_obs(), pobs.dim(), |i, j| quantile(pobs.matrix()[(i, j)]))
}

fn pairwise_kendall(pobs: &PseudoObservations) -> Matrix {
    let n = pobs.dim();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| pobs.column(j)).collect();
    let mut tau = Matrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let t = crate::gof::kendall_tau(&cols[i], &cols[j]).unwrap_or(0.0);
            tau[(i, j)] = t;
            tau[(j, i)] = t;
        }
    }
    tau
}

fn mean_kendall(pobs: &PseudoObservations) -> f64 {
    let tau = pairwise_kendall(pobs);
    let n = pobs.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += tau[(i, j)];
        }
    }
    acc / (n * (n - 1) / 2) as f64
}

fn pearson_matrix(x: &Matrix) -> Matrix {
    let n = x.cols();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| (0..x.rows()).map(|i| x[(i, j)]).collect()).collect();
    let mut r = Matrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = crate::data::pearson(&cols[i], &cols[j]).unwrap_or(0.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Lower Cholesky factor of a correlation matrix built from partial
/// correlations stored row by row (`z[(i, j)]`, `j < i`).
fn partial_to_factor(z: &[f64], n: usize) -> Matrix {
    let mut l = Matrix::zeros(n, n);
    l[(0, 0)] = 1.0;
    let mut p = 0;
    for i in 1..n {
        let mut rem: f64 = 1.0;
        for j in 0..i {
            let v = z[p] * rem.sqrt();
            p += 1;
            l[(i, j)] = v;
            rem -= v * v;
        }
        l[(i, i)] = rem.max(0.0).sqrt();
    }
    l
}

fn factor_to_partial(l: &Matrix) -> Vec<f64> {
    let n = l.rows();
    let mut z = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        let mut rem: f64 = 1.0;
        for j in 0..i {
            let v = l[(i, j)];
            z.push((v / rem.max(1e-300).sqrt()).clamp(-1.0 + 1e-9, 1.0 - 1e-9));
            rem -= v * v;
        }
    }
    z
}

fn correlation_from_factor(l: &Matrix) -> Result<CorrelationMatrix, CopulaError> {
    let n = l.rows();
    let mut m = Matrix::from_fn(n, n, |i, j| (0..=i.min(j)).map(|k| l[(i, k)] * l[(j, k)]).sum());
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    match CorrelationMatrix::new(m.clone()) {
        Ok(c) => Ok(c),
        Err(_) => Ok(CorrelationMatrix::repair(&m)?.0),
    }
}

/// Log-likelihood of an elliptical family at fixed scores as a function of a
/// Cholesky factor.
fn elliptical_loglik(scores: &Matrix, chol: &Cholesky, nu: Option<f64>) -> f64 {
    let mut scratch = Vec::new();
    let n = scores.cols();
    match nu {
        None => (0..scores.rows()).map(|i| gaussian_ln_density_scores(chol, scores.row(i), &mut scratch)).sum(),
        Some(nu) => {
            let c = student_constant(nu, n, chol.ln_det());
            (0..scores.rows()).map(|i| student_ln_density_scores(chol, nu, c, scores.row(i), &mut scratch)).sum()
        }
    }
}

/// Maximizes the elliptical likelihood over the correlation matrix at fixed
/// scores, starting from `start`. Returns the factor, its log-likelihood and
/// whether the optimizer converged.
fn polish_correlation(
    scores: &Matrix,
    start: &CorrelationMatrix,
    nu: Option<f64>,
    opts: &FitOptions,
) -> Result<(CorrelationMatrix, f64, bool), CopulaError> {
    let n = scores.cols();
    let l0 = start.cholesky().into_factor();
    let start_ll = elliptical_loglik(scores, &start.cholesky(), nu);
    if !opts.polish_correlation {
        return Ok((start.clone(), start_ll, true));
    }
    let z0 = factor_to_partial(&l0);
    let bounds = vec![Bound::Interval(-1.0, 1.0); z0.len()];
    let objective = |z: &[f64]| match Cholesky::from_lower(partial_to_factor(z, n)) {
        Ok(chol) => -elliptical_loglik(scores, &chol, nu),
        Err(_) => f64::INFINITY,
    };
    let m = minimize(objective, &z0, &bounds, &opts.optimizer)?;
    if -m.fx <= start_ll {
        return Ok((start.clone(), start_ll, m.converged()));
    }
    let corr = correlation_from_factor(&partial_to_factor(&m.x, n))?;
    let ll = elliptical_loglik(scores, &corr.cholesky(), nu);
    if ll < start_ll {
        return Ok((start.clone(), start_ll, m.converged()));
    }
    Ok((corr, ll, m.converged()))
}

fn fit_gaussian(pobs: &PseudoObservations, opts: &FitOptions) -> Result<CopulaFit, CopulaError> {
    let scores = score_matrix(pobs, norm_quantile);
    let (start, _) = CorrelationMatrix::repair(&pearson_matrix(&scores))?;
    let start_ll = elliptical_loglik(&scores, &start.cholesky(), None);
    let (corr, loglik, converged) = polish_correlation(&scores, &start, None, opts)?;
    Ok(CopulaFit { spec: CopulaSpec::gaussian(corr), loglik, start_loglik: start_ll, n_obs: pobs.n_obs(), converged })
}

/// Student-t scores. Rank columns share their values, so each distinct value
/// is transformed once.
fn t_scores(pobs: &PseudoObservations, nu: f64) -> Matrix {
    let t = StudentT::new(nu).expect("nu > 0");
    let mut distinct = pobs.matrix().as_slice().to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let q: Vec<f64> = distinct.iter().map(|&p| t.quantile(p)).collect();
    score_matrix(pobs, |p| q[distinct.partition_point(|&v| v < p)])
}

/// Best degrees of freedom for a fixed correlation matrix: grid profile (or
/// the given start), then a one-dimensional search around the best point.
fn profile_nu(
    pobs: &PseudoObservations,
    chol: &Cholesky,
    opts: &FitOptions,
    start: Option<f64>,
) -> Result<(f64, f64, bool), CopulaError> {
    let (lo, hi) = opts.nu_bounds;
    let ll_at = |nu: f64| elliptical_loglik(&t_scores(pobs, nu), chol, Some(nu));
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    // a previous estimate replaces the grid
    let candidates: Vec<f64> = match start {
        Some(nu) => vec![nu],
        None => STUDENT_NU_GRID.to_vec(),
    };
    for nu in candidates.into_iter().filter(|&nu| nu > lo && nu < hi) {
        let ll = ll_at(nu);
        if ll > best.1 {
            best = (nu, ll);
        }
    }
    if !best.0.is_finite() {
        return Err(CopulaError::InvalidParameter(format!("empty degrees-of-freedom range ({lo}, {hi})")));
    }
    let one_d = MinimizeOptions { tol: 1e-3, max_evals: 200, initial_step: 0.1, restart: false, ..MinimizeOptions::default() };
    let m = minimize(|x| -ll_at(x[0]), &[best.0], &[Bound::Interval(lo, hi)], &one_d)?;
    if -m.fx > best.1 {
        Ok((m.x[0], -m.fx, m.converged()))
    } else {
        Ok((best.0, best.1, m.converged()))
    }
}

fn fit_student(pobs: &PseudoObservations, opts: &FitOptions) -> Result<CopulaFit, CopulaError> {
    let n = pobs.dim();
    let tau = pairwise_kendall(pobs);
    let sine = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { (std::f64::consts::FRAC_PI_2 * tau[(i, j)]).sin() });
    let (start, _) = CorrelationMatrix::repair(&sine)?;
    let chol = start.cholesky();

    let (nu, _, nu_ok) = profile_nu(pobs, &chol, opts, None)?;
    let start_ll = elliptical_loglik(&t_scores(pobs, STUDENT_NU_GRID[2]), &chol, Some(STUDENT_NU_GRID[2]));

    let scores = t_scores(pobs, nu);
    let (corr, _, corr_ok) = polish_correlation(&scores, &start, Some(nu), opts)?;
    // one more profile pass at the polished correlation
    let (nu, loglik, nu_ok2) = profile_nu(pobs, &corr.cholesky(), opts, Some(nu))?;
    Ok(CopulaFit {
        spec: CopulaSpec::student_t(corr, nu)?,
        loglik,
        start_loglik: start_ll,
        n_obs: pobs.n_obs(),
        converged: nu_ok && corr_ok && nu_ok2,
    })
}

fn archimedean_fit(
    pobs: &PseudoObservations,
    theta0: f64,
    bound: Bound,
    ll: impl Fn(f64) -> f64,
    make: impl Fn(f64) -> Result<CopulaSpec, CopulaError>,
) -> Result<CopulaFit, CopulaError> {
    let start_ll = ll(theta0);
    let one_d = MinimizeOptions { tol: 1e-8, max_evals: 500, initial_step: 0.1, restart: true, ..MinimizeOptions::default() };
    let m = minimize(|x| -ll(x[0]), &[theta0], &[bound], &one_d)?;
    let (theta, loglik) = if -m.fx > start_ll { (m.x[0], -m.fx) } else { (theta0, start_ll) };
    Ok(CopulaFit { spec: make(theta)?, loglik, start_loglik: start_ll, n_obs: pobs.n_obs(), converged: m.converged() })
}

fn fit_clayton(pobs: &PseudoObservations, _opts: &FitOptions) -> Result<CopulaFit, CopulaError> {
    let n = pobs.dim();
    let tau = mean_kendall(pobs);
    let theta0 = if tau > 0.0 { (2.0 * tau / (1.0 - tau)).clamp(0.01, 50.0) } else { 0.01 };
    let ll = |theta: f64| {
        let c = clayton_constant(theta, n);
        (0..pobs.n_obs()).map(|i| clayton_ln_density(theta, c, pobs.row(i))).sum::<f64>()
    };
    archimedean_fit(pobs, theta0, Bound::Lower(0.0), ll, |t| CopulaSpec::clayton(t, n))
}

fn fit_gumbel(pobs: &PseudoObservations, _opts: &FitOptions) -> Result<CopulaFit, CopulaError> {
    let tau = mean_kendall(pobs);
    let theta0 = if tau > 0.0 { (1.0 / (1.0 - tau)).clamp(1.01, 50.0) } else { 1.01 };
    let ll = |theta: f64| {
        (0..pobs.n_obs()).map(|i| {
            let r = pobs.row(i);
            gumbel_ln_density(theta, r[0], r[1])
        })
        .sum::<f64>()
    };
    archimedean_fit(pobs, theta0, Bound::Lower(1.0), ll, |t| CopulaSpec::gumbel(t, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::sample_copula;
    use crate::mathcore::RandomStream;

    #[test]
    fn partial_correlation_round_trip() {
        let c = CorrelationMatrix::new(
            Matrix::from_rows(&[vec![1.0, 0.5, -0.2], vec![0.5, 1.0, 0.3], vec![-0.2, 0.3, 1.0]]).unwrap(),
        )
        .unwrap();
        let l = c.cholesky().into_factor();
        let z = factor_to_partial(&l);
        assert!(z.iter().all(|v| v.abs() < 1.0));
        let back = correlation_from_factor(&partial_to_factor(&z, 3)).unwrap();
        assert!(back.matrix().max_abs_diff(c.matrix()) < 1e-12);
    }

    #[test]
    fn recovers_gaussian_correlation() {
        let spec = CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.6).unwrap());
        let mut errs = Vec::new();
        for seed in 0..20 {
            let u = sample_copula(&spec, 5000, &mut RandomStream::new(seed, 1)).unwrap();
            let fit = fit_copula(&u, Family::Gaussian).unwrap();
            assert!(fit.loglik >= fit.start_loglik);
            errs.push((fit.spec.correlation().unwrap().get(0, 1) - 0.6).abs());
        }
        assert!(errs.iter().all(|&e| e < 0.03), "{errs:?}");
    }

    #[test]
    fn recovers_clayton_theta() {
        let spec = CopulaSpec::clayton(2.0, 2).unwrap();
        let u = sample_copula(&spec, 5000, &mut RandomStream::new(4, 2)).unwrap();
        let fit = fit_copula(&u, Family::Clayton).unwrap();
        let CopulaSpec::Clayton { theta, .. } = fit.spec else { panic!() };
        assert!((1.8..=2.2).contains(&theta), "{theta}");
        assert!(fit.converged);
    }

    #[test]
    fn clayton_on_independent_data() {
        let u = sample_copula(&CopulaSpec::independence(2), 5000, &mut RandomStream::new(8, 0)).unwrap();
        let fit = fit_copula(&u, Family::Clayton).unwrap();
        let CopulaSpec::Clayton { theta, .. } = fit.spec else { panic!() };
        assert!(theta < 0.1, "{theta}");
        assert!(fit.loglik.abs() < 10.0, "{}", fit.loglik);
    }

    #[test]
    fn recovers_student_t() {
        let spec = CopulaSpec::student_t(CorrelationMatrix::bivariate(0.5).unwrap(), 5.0).unwrap();
        let u = sample_copula(&spec, 5000, &mut RandomStream::new(21, 0)).unwrap();
        let fit = fit_copula(&u, Family::StudentT).unwrap();
        let CopulaSpec::StudentT { corr, nu } = &fit.spec else { panic!() };
        assert!((corr.get(0, 1) - 0.5).abs() < 0.03, "{}", corr.get(0, 1));
        assert!((3.5..8.0).contains(nu), "{nu}");
        assert!(fit.loglik >= fit.start_loglik);
    }

    #[test]
    fn recovers_gumbel_and_trivariate_clayton() {
        let u = sample_copula(&CopulaSpec::gumbel(2.0, 2).unwrap(), 5000, &mut RandomStream::new(2, 2)).unwrap();
        let CopulaSpec::Gumbel { theta, .. } = fit_copula(&u, Family::Gumbel).unwrap().spec else { panic!() };
        assert!((theta - 2.0).abs() < 0.1, "{theta}");

        let u3 = sample_copula(&CopulaSpec::clayton(1.5, 3).unwrap(), 3000, &mut RandomStream::new(2, 3)).unwrap();
        let CopulaSpec::Clayton { theta, dim } = fit_copula(&u3, Family::Clayton).unwrap().spec else { panic!() };
        assert_eq!(dim, 3);
        assert!((theta - 1.5).abs() < 0.15, "{theta}");
    }

    #[test]
    fn trivariate_gaussian_polish_improves_on_start() {
        let corr = CorrelationMatrix::new(
            Matrix::from_rows(&[vec![1.0, 0.7, 0.2], vec![0.7, 1.0, -0.3], vec![0.2, -0.3, 1.0]]).unwrap(),
        )
        .unwrap();
        let u = sample_copula(&CopulaSpec::gaussian(corr.clone()), 2000, &mut RandomStream::new(5, 5)).unwrap();
        let fit = fit_copula(&u, Family::Gaussian).unwrap();
        assert!(fit.loglik >= fit.start_loglik);
        assert!(fit.spec.correlation().unwrap().matrix().max_abs_diff(corr.matrix()) < 0.05);
    }

    #[test]
    fn gumbel_needs_pairs() {
        let u = sample_copula(&CopulaSpec::gumbel(2.0, 3).unwrap(), 200, &mut RandomStream::new(1, 1)).unwrap();
        assert!(matches!(fit_copula(&u, Family::Gumbel), Err(CopulaError::UnsupportedDimension { dim: 3, .. })));
        let pairs = fit_pairwise(&u, Family::Gumbel, &FitOptions::default()).unwrap();
        assert_eq!(pairs.iter().map(|p| (p.i, p.j)).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn too_few_observations() {
        let u = sample_copula(&CopulaSpec::independence(2), 20, &mut RandomStream::new(1, 1)).unwrap();
        assert!(matches!(fit_copula(&u, Family::Clayton), Err(CopulaError::TooFewObservations { .. })));
    }
}
