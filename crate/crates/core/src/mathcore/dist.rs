//! Standard normal and Student-t distributions.
//!
//! The checked free functions validate their inputs; the [`StudentT`] type
//! caches its normalising constant and is what the likelihood code uses in
//! inner loops.

use std::f64::consts::{PI, SQRT_2};

use super::special::{erfc, inc_beta_pair, ln_gamma};
use super::{MathError, ProbValue};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Φ(x) without input checks. `±inf` map to 1 and 0.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ⁻¹(p) without input checks; `0` and `1` map to `∓inf`.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        return -lower_norm_quantile(1.0 - p);
    }
    lower_norm_quantile(p)
}

/// Quantile for `p < 0.5`: Hastings' rational start, then Halley steps on Φ.
fn lower_norm_quantile(p: f64) -> f64 {
    let t = (-2.0 * p.ln()).sqrt();
    let num = 2.515_517 + t * (0.802_853 + t * 0.010_328);
    let den = 1.0 + t * (1.432_788 + t * (0.189_269 + t * 0.001_308));
    let mut x = -(t - num / den);
    for _ in 0..4 {
        let err = norm_cdf(x) - p;
        let u = err * SQRT_2PI * (0.5 * x * x).exp();
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Standard normal CDF Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<ProbValue, MathError> {
    if !x.is_finite() {
        return Err(MathError::Domain(format!("normal cdf argument {x} is not finite")));
    }
    Ok(ProbValue::clamped(norm_cdf(x)))
}

/// Standard normal quantile Φ⁻¹(p) for `p` in the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64, MathError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MathError::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    Ok(norm_quantile(p))
}

/// Student-t CDF with `nu > 0` degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<ProbValue, MathError> {
    let dist = StudentT::new(nu)?;
    if x.is_nan() {
        return Err(MathError::Domain("student-t cdf argument is NaN".into()));
    }
    Ok(ProbValue::clamped(dist.cdf(x)))
}

/// Student-t quantile with `nu > 0` degrees of freedom.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64, MathError> {
    let dist = StudentT::new(nu)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(MathError::Domain(format!("student-t quantile needs 0 < p < 1, got {p}")));
    }
    Ok(dist.quantile(p))
}

/// Student-t distribution (location 0, scale 1).
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    nu: f64,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Result<Self, MathError> {
        if !(nu > 0.0) {
            return Err(MathError::Domain(format!("degrees of freedom must be > 0, got {nu}")));
        }
        let ln_norm = if nu.is_infinite() {
            -LN_SQRT_2PI
        } else {
            ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
        };
        Ok(Self { nu, ln_norm })
    }

    pub fn dof(&self) -> f64 {
        self.nu
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.nu.is_infinite() {
            return norm_ln_pdf(x);
        }
        self.ln_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Probability mass below `-|x|`, computed without cancellation.
    fn tail(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        let t2 = x * x;
        let denom = self.nu + t2;
        let (i, _) = inc_beta_pair(0.5 * self.nu, 0.5, self.nu / denom, t2 / denom);
        0.5 * i
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.nu.is_infinite() {
            return norm_cdf(x);
        }
        if x == 0.0 {
            return 0.5;
        }
        let tail = self.tail(x);
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// Quantile; `0` and `1` map to `∓inf`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if p == 0.5 {
            return 0.0;
        }
        if self.nu.is_infinite() {
            return norm_quantile(p);
        }
        if p > 0.5 {
            -self.lower_quantile(1.0 - p)
        } else {
            self.lower_quantile(p)
        }
    }

    /// Solves `F(x) = q` for `q < 0.5` on the negative half-line.
    ///
    /// Closed forms for ν = 1, 2; otherwise Newton steps (in `ln(-x)` once in
    /// the tail, where both Gaussian and power tails are close to linear)
    /// safeguarded by a bisection bracket.
    fn lower_quantile(&self, q: f64) -> f64 {
        let nu = self.nu;
        if nu == 1.0 {
            return -1.0 / (PI * q).tan();
        }
        if nu == 2.0 {
            return (2.0 * q - 1.0) / (2.0 * q * (1.0 - q)).sqrt();
        }

        let (mut x, mut f) = self.initial_guess(q);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..100 {
            if f < q {
                lo = x;
            } else {
                hi = x;
            }
            if f == q {
                return x;
            }
            let dens = self.pdf(x);
            let mut next = if x < -1.0 {
                let h = (f / q).ln();
                let dh = dens * x / f;
                let y = (-x).ln() - h / dh;
                -y.exp()
            } else {
                x - (f - q) / dens
            };
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if lo.is_finite() {
                    if hi < -1.0 {
                        -((lo * hi).sqrt())
                    } else {
                        0.5 * (lo + hi)
                    }
                } else {
                    4.0 * hi.min(-1.0)
                };
            }
            let done = (next - x).abs() <= 1e-14 * x.abs().max(1e-300);
            x = next;
            if done {
                break;
            }
            f = self.cdf(x);
        }
        x
    }

    fn initial_guess(&self, q: f64) -> (f64, f64) {
        let nu = self.nu;
        let z = lower_norm_quantile(q);
        let z2 = z * z;
        let g1 = (z2 + 1.0) * z / 4.0;
        let g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
        let g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0;
        let g4 = ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) * z / 92_160.0;
        let cf = z + (g1 + (g2 + (g3 + g4 / nu) / nu) / nu) / nu;
        // tail asymptote F(x) ~ nu^{nu/2 - 1} |x|^{-nu} / B(nu/2, 1/2)
        let ln_k = (0.5 * nu - 1.0) * nu.ln() - super::special::ln_beta(0.5 * nu, 0.5);
        let tail = -((ln_k - q.ln()) / nu).exp();

        let cf = if cf.is_finite() && cf < 0.0 { cf } else { tail };
        let f_cf = self.cdf(cf);
        if nu >= 8.0 || q > 0.05 {
            return (cf, f_cf);
        }
        let f_tail = self.cdf(tail);
        if (f_tail / q).ln().abs() < (f_cf / q).ln().abs() {
            (tail, f_tail)
        } else {
            (cf, f_cf)
        }
    }
}
