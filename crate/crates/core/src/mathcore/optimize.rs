//! Derivative-free minimization: Nelder-Mead on box constraints removed by
//! reparameterization (log for half-lines, logit for intervals).

use serde::{Deserialize, Serialize};

use super::MathError;

/// Per-coordinate constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Free,
    /// `x > lo`
    Lower(f64),
    /// `x < hi`
    Upper(f64),
    /// `lo < x < hi`
    Interval(f64, f64),
}

impl Bound {
    fn validate(&self) -> Result<(), MathError> {
        match *self {
            Bound::Interval(lo, hi) if !(lo < hi) => {
                Err(MathError::InvalidBounds(format!("empty interval ({lo}, {hi})")))
            }
            Bound::Lower(v) | Bound::Upper(v) if v.is_nan() => Err(MathError::InvalidBounds("NaN bound".into())),
            _ => Ok(()),
        }
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            Bound::Free => x.is_finite(),
            Bound::Lower(lo) => x >= lo,
            Bound::Upper(hi) => x <= hi,
            Bound::Interval(lo, hi) => x >= lo && x <= hi,
        }
    }

    /// Constrained value for an unconstrained coordinate, kept strictly
    /// inside open bounds even when the transform saturates.
    pub fn to_bounded(&self, y: f64) -> f64 {
        match *self {
            Bound::Free => y,
            Bound::Lower(lo) => (lo + y.exp()).max(lo.next_up()),
            Bound::Upper(hi) => (hi - y.exp()).min(hi.next_down()),
            Bound::Interval(lo, hi) => (lo + (hi - lo) * logistic(y)).clamp(lo.next_up(), hi.next_down()),
        }
    }

    /// Unconstrained coordinate for a point inside the bound; boundary points
    /// are moved a hair inside.
    pub fn to_unbounded(&self, x: f64) -> f64 {
        match *self {
            Bound::Free => x,
            Bound::Lower(lo) => (x - lo).max(1e-12 * (1.0 + lo.abs())).ln(),
            Bound::Upper(hi) => (hi - x).max(1e-12 * (1.0 + hi.abs())).ln(),
            Bound::Interval(lo, hi) => {
                let eps = 1e-12;
                let t = ((x - lo) / (hi - lo)).clamp(eps, 1.0 - eps);
                (t / (1.0 - t)).ln()
            }
        }
    }
}

pub fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when every vertex lies within this distance (max-norm, in the
    /// unconstrained coordinates) of the best vertex.
    pub tol: f64,
    /// Also stop when the simplex function values agree to this relative
    /// tolerance; needed when the minimum lies on a bound and the
    /// unconstrained coordinate drifts off to infinity.
    pub ftol: f64,
    pub max_evals: usize,
    /// Initial simplex edge, relative to `max(1, |y|)`.
    pub initial_step: f64,
    /// Restart once from the converged point to guard against collapse.
    pub restart: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, ftol: 1e-12, max_evals: 20_000, initial_step: 0.1, restart: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxEvaluations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Minimizes `f` over the box described by `bounds`, starting from `x0`.
///
/// Non-finite objective values away from the start are treated as `+inf`, so
/// the simplex simply retreats from them.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: &[Bound], opts: &MinimizeOptions) -> Result<Minimum, MathError>
where
    F: FnMut(&[f64]) -> f64,
{
    let k = x0.len();
    if k == 0 {
        return Err(MathError::Dimension("cannot minimize over zero parameters".into()));
    }
    if bounds.len() != k {
        return Err(MathError::InvalidBounds(format!("{} bounds for {k} parameters", bounds.len())));
    }
    for (b, &x) in bounds.iter().zip(x0) {
        b.validate()?;
        if !b.contains(x) {
            return Err(MathError::InvalidBounds(format!("start value {x} violates {b:?}")));
        }
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(MathError::StartNotFinite);
    }

    let mut evals = 1usize;
    let mut xbuf = vec![0.0; k];
    let mut eval = |y: &[f64], evals: &mut usize| -> f64 {
        for ((xi, yi), b) in xbuf.iter_mut().zip(y).zip(bounds) {
            *xi = b.to_bounded(*yi);
        }
        *evals += 1;
        let v = f(&xbuf);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let y0: Vec<f64> = bounds.iter().zip(x0).map(|(b, &x)| b.to_unbounded(x)).collect();
    let mut best_y = y0;
    let mut best_f = eval(&best_y, &mut evals);
    let mut runs_left = if opts.restart { 2 } else { 1 };
    let termination = loop {
        let (y, fy, status) = nelder_mead(&mut eval, &best_y, best_f, opts, &mut evals);
        let moved = fy < best_f;
        if fy <= best_f {
            best_y = y;
            best_f = fy;
        }
        runs_left -= 1;
        // a restart is pointless when the run did not move off its start
        if status == Termination::MaxEvaluations || runs_left == 0 || !moved {
            break status;
        }
    };

    let x_best: Vec<f64> = bounds.iter().zip(&best_y).map(|(b, &y)| b.to_bounded(y)).collect();
    let (x, fx) = if best_f <= f0 { (x_best, best_f) } else { (x0.to_vec(), f0) };
    Ok(Minimum { x, fx, evaluations: evals, termination })
}

/// One Nelder-Mead run with the dimension-adaptive coefficients of Gao & Han.
fn nelder_mead<E>(eval: &mut E, y0: &[f64], f0: f64, opts: &MinimizeOptions, evals: &mut usize) -> (Vec<f64>, f64, Termination)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let k = y0.len();
    let kf = k as f64;
    let (alpha, gamma, rho, sigma) = if k > 1 {
        (1.0, 1.0 + 2.0 / kf, 0.75 - 1.0 / (2.0 * kf), 1.0 - 1.0 / kf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((y0.to_vec(), f0));
    for i in 0..k {
        let mut y = y0.to_vec();
        y[i] += opts.initial_step * y[i].abs().max(1.0);
        let fy = eval(&y, evals);
        simplex.push((y, fy));
    }

    let mut centroid = vec![0.0; k];
    let mut trial = vec![0.0; k];
    loop {
        // stable sort keeps the incumbent ahead of ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best_f = simplex[0].1;
        let worst_f = simplex[k].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(y, _)| y.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let flat = best_f.is_finite() && worst_f - best_f <= opts.ftol * best_f.abs().max(1.0);
        if diameter < opts.tol || flat {
            return (simplex[0].0.clone(), best_f, Termination::Converged);
        }
        if *evals >= opts.max_evals {
            return (simplex[0].0.clone(), best_f, Termination::MaxEvaluations);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (y, _) in &simplex[..k] {
            for (c, v) in centroid.iter_mut().zip(y) {
                *c += v / kf;
            }
        }
        let worst = simplex[k].0.clone();
        let along = |t: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + t * (c - w);
            }
        };

        along(alpha, &mut trial);
        let f_r = eval(&trial, evals);
        let second_worst_f = simplex[k - 1].1;
        if f_r < best_f {
            let reflected = trial.clone();
            along(alpha * gamma, &mut trial);
            let f_e = eval(&trial, evals);
            simplex[k] = if f_e < f_r { (trial.clone(), f_e) } else { (reflected, f_r) };
            continue;
        }
        if f_r < second_worst_f {
            simplex[k] = (trial.clone(), f_r);
            continue;
        }
        // contraction (outside when the reflection beat the worst point)
        let (t, f_ref) = if f_r < worst_f { (alpha * rho, f_r) } else { (-rho, worst_f) };
        along(t, &mut trial);
        let f_c = eval(&trial, evals);
        if f_c <= f_ref {
            simplex[k] = (trial.clone(), f_c);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for (y, fy) in simplex.iter_mut().skip(1) {
            for (v, b) in y.iter_mut().zip(&best) {
                *v = b + sigma * (*v - b);
            }
            *fy = eval(y, evals);
        }
    }
}
