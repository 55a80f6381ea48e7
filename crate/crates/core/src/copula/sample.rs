//! Copula sampling.

use crate::mathcore::{norm_cdf, Matrix, RandomStream, StudentT};

use super::{CopulaError, CopulaSpec, PseudoObservations};

/// Smallest and largest values a draw may take, so that every sample stays
/// strictly inside the unit cube after floating-point rounding.
pub(crate) const U_MIN: f64 = f64::EPSILON / 2.0;
pub(crate) const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Draws `k` points from `spec`.
pub fn sample_copula(spec: &CopulaSpec, k: usize, stream: &mut RandomStream) -> Result<PseudoObservations, CopulaError> {
    let n = spec.dim();
    let mut out = Matrix::zeros(k, n);
    let mut row = vec![0.0; n];
    let mut sampler = RowSampler::new(spec)?;
    for i in 0..k {
        sampler.draw(stream, &mut row);
        for j in 0..n {
            out[(i, j)] = row[j];
        }
    }
    Ok(PseudoObservations(out))
}

/// Reusable per-row sampler.
pub(crate) struct RowSampler {
    kind: Kind,
    z: Vec<f64>,
}

enum Kind {
    Gaussian { chol: crate::mathcore::Cholesky },
    StudentT { chol: crate::mathcore::Cholesky, nu: f64, t: StudentT },
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
}

impl RowSampler {
    pub(crate) fn new(spec: &CopulaSpec) -> Result<Self, CopulaError> {
        let kind = match spec {
            CopulaSpec::Gaussian { corr } => Kind::Gaussian { chol: corr.cholesky() },
            CopulaSpec::StudentT { corr, nu } => Kind::StudentT { chol: corr.cholesky(), nu: *nu, t: StudentT::new(*nu)? },
            CopulaSpec::Clayton { theta, .. } => Kind::Clayton { theta: *theta },
            CopulaSpec::Gumbel { theta, .. } => Kind::Gumbel { theta: *theta },
        };
        Ok(Self { kind, z: vec![0.0; spec.dim()] })
    }

    /// Fills `u` with one draw.
    pub(crate) fn draw(&mut self, stream: &mut RandomStream, u: &mut [f64]) {
        let n = u.len();
        match &self.kind {
            Kind::Gaussian { chol } => {
                for zi in self.z.iter_mut() {
                    *zi = stream.next_gaussian();
                }
                chol.lower_mul(&self.z, u);
                for v in u.iter_mut() {
                    *v = norm_cdf(*v);
                }
            }
            Kind::StudentT { chol, nu, t } => {
                for zi in self.z.iter_mut() {
                    *zi = stream.next_gaussian();
                }
                chol.lower_mul(&self.z, u);
                let scale = (stream.next_chi_squared(*nu) / nu).sqrt();
                for v in u.iter_mut() {
                    *v = t.cdf(*v / scale);
                }
            }
            Kind::Clayton { theta } => {
                let frailty = stream.next_gamma(1.0 / theta);
                for v in u.iter_mut().take(n) {
                    let e = stream.next_exponential();
                    *v = (-(e / frailty).ln_1p() / theta).exp();
                }
            }
            Kind::Gumbel { theta } => {
                let frailty = stream.next_positive_stable(1.0 / theta);
                for v in u.iter_mut().take(n) {
                    let e = stream.next_exponential();
                    *v = (-(e / frailty).powf(1.0 / theta)).exp();
                }
            }
        }
        for v in u.iter_mut() {
            *v = v.clamp(U_MIN, U_MAX);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{norm_quantile, CorrelationMatrix};

    fn ks_uniform(mut x: Vec<f64>) -> f64 {
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
            .fold(0.0, f64::max)
    }

    /// Brute-force concordance count.
    fn brute_tau(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += ((x[i] - x[j]) * (y[i] - y[j])).signum();
            }
        }
        s / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn deterministic_per_stream() {
        let spec = CopulaSpec::student_t(CorrelationMatrix::bivariate(0.3).unwrap(), 5.0).unwrap();
        let a = sample_copula(&spec, 100, &mut RandomStream::new(1, 0)).unwrap();
        let b = sample_copula(&spec, 100, &mut RandomStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_independence_scores_uncorrelated() {
        let k = 100_000;
        let u = sample_copula(&CopulaSpec::independence(2), k, &mut RandomStream::new(7, 0)).unwrap();
        let x: Vec<f64> = u.column(0).iter().map(|&p| norm_quantile(p)).collect();
        let y: Vec<f64> = u.column(1).iter().map(|&p| norm_quantile(p)).collect();
        let r = crate::data::pearson(&x, &y).unwrap();
        assert!(r.abs() < 3.0 / (k as f64).sqrt(), "{r}");
    }

    #[test]
    fn marginals_are_uniform() {
        let k = 100_000;
        let specs = [
            CopulaSpec::gaussian(CorrelationMatrix::bivariate(0.8).unwrap()),
            CopulaSpec::student_t(CorrelationMatrix::bivariate(-0.4).unwrap(), 3.0).unwrap(),
            CopulaSpec::clayton(2.0, 2).unwrap(),
            CopulaSpec::gumbel(3.0, 2).unwrap(),
        ];
        for (s, spec) in specs.iter().enumerate() {
            let u = sample_copula(spec, k, &mut RandomStream::new(11, s as u64)).unwrap();
            for j in 0..2 {
                let d = ks_uniform(u.column(j));
                assert!(d < 1.63 / (k as f64).sqrt(), "{spec:?} column {j}: {d}");
            }
        }
    }

    #[test]
    fn archimedean_kendall_tau() {
        let k = 100_000;
        for (spec, want) in [(CopulaSpec::clayton(2.0, 2).unwrap(), 0.5), (CopulaSpec::gumbel(2.0, 2).unwrap(), 0.5)] {
            let u = sample_copula(&spec, k, &mut RandomStream::new(3, 0)).unwrap();
            let tau = crate::gof::kendall_tau(&u.column(0), &u.column(1)).unwrap();
            assert!((tau - want).abs() < 0.01, "{spec:?}: {tau}");
            // brute force on a subsample agrees with the fast count
            let sub = u.head(2000);
            let fast = crate::gof::kendall_tau(&sub.column(0), &sub.column(1)).unwrap();
            assert!((fast - brute_tau(&sub.column(0), &sub.column(1))).abs() < 1e-12);
        }
    }

    #[test]
    fn clayton_lower_tail_concentration() {
        let k = 1_000_000;
        let u = sample_copula(&CopulaSpec::clayton(2.0, 2).unwrap(), k, &mut RandomStream::new(5, 0)).unwrap();
        let (a, b) = (u.column(0), u.column(1));
        let conc: Vec<(f64, f64)> = [0.01, 0.005, 0.002]
            .iter()
            .map(|&q| {
                let both = a.iter().zip(&b).filter(|(x, y)| **x < q && **y < q).count() as f64;
                let second = b.iter().filter(|y| **y < q).count() as f64;
                (q, both / second)
            })
            .collect();
        // linear extrapolation to q = 0
        let n = conc.len() as f64;
        let mq = conc.iter().map(|c| c.0).sum::<f64>() / n;
        let mp = conc.iter().map(|c| c.1).sum::<f64>() / n;
        let slope = conc.iter().map(|c| (c.0 - mq) * (c.1 - mp)).sum::<f64>() / conc.iter().map(|c| (c.0 - mq).powi(2)).sum::<f64>();
        let at_zero = mp - slope * mq;
        assert!((at_zero - 2f64.powf(-0.5)).abs() < 0.05, "{conc:?} -> {at_zero}");
    }

    #[test]
    fn gumbel_in_higher_dimension_is_exchangeable() {
        let u = sample_copula(&CopulaSpec::gumbel(2.0, 4).unwrap(), 20_000, &mut RandomStream::new(9, 0)).unwrap();
        for j in 1..4 {
            let tau = crate::gof::kendall_tau(&u.column(0), &u.column(j)).unwrap();
            assert!((tau - 0.5).abs() < 0.02, "{tau}");
        }
    }
}
