//! Rank transforms and the empirical copula.

use crate::mathcore::{Matrix, ProbValue};

use super::{CopulaError, PseudoObservations};

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Column-wise `rank / (k + 1)` of a `k x n` sample.
pub fn pseudo_observations(sample: &Matrix) -> Result<PseudoObservations, CopulaError> {
    let (k, n) = (sample.rows(), sample.cols());
    if k < 2 {
        return Err(CopulaError::TooFewObservations { needed: 2, got: k });
    }
    let mut out = Matrix::zeros(k, n);
    let denom = (k + 1) as f64;
    for j in 0..n {
        let col: Vec<f64> = (0..k).map(|i| sample[(i, j)]).collect();
        if col.iter().any(|v| v.is_nan()) {
            return Err(CopulaError::InvalidParameter(format!("column {j} contains NaN")));
        }
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            out[(i, j)] = r / denom;
        }
    }
    Ok(PseudoObservations(out))
}

/// Share of rows that are componentwise `<= u`.
pub fn empirical_copula(pobs: &PseudoObservations, u: &[f64]) -> Result<ProbValue, CopulaError> {
    if u.len() != pobs.dim() {
        return Err(CopulaError::Dimension(format!("{}-dim point for {}-dim observations", u.len(), pobs.dim())));
    }
    let hits = (0..pobs.n_obs()).filter(|&i| pobs.row(i).iter().zip(u).all(|(a, b)| a <= b)).count();
    Ok(ProbValue::clamped(hits as f64 / pobs.n_obs() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rank as one plus the number smaller plus half the number of other ties.
    fn brute_rank(x: &[f64], i: usize) -> f64 {
        let less = x.iter().filter(|&&v| v < x[i]).count() as f64;
        let equal = x.iter().filter(|&&v| v == x[i]).count() as f64;
        less + (equal + 1.0) / 2.0
    }

    fn col_matrix(x: &[f64]) -> Matrix {
        Matrix::from_fn(x.len(), 1, |i, _| x[i])
    }

    #[test]
    fn direct_ranks() {
        let u = pseudo_observations(&col_matrix(&[10.0, 20.0, 30.0])).unwrap();
        assert_eq!(u.column(0), vec![0.25, 0.5, 0.75]);
        let v = pseudo_observations(&col_matrix(&[30.0, 10.0, 20.0])).unwrap();
        assert_eq!(v.column(0), vec![0.75, 0.25, 0.5]);
    }

    #[test]
    fn ties_get_average_ranks() {
        let x = [3.0, 1.0, 3.0, 2.0, 3.0, 1.0];
        let r = average_ranks(&x);
        assert_eq!(r, vec![5.0, 1.5, 5.0, 3.0, 5.0, 1.5]);
        assert_eq!(r.iter().sum::<f64>(), 21.0);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            pseudo_observations(&col_matrix(&[1.0])),
            Err(CopulaError::TooFewObservations { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn empirical_copula_values() {
        // ranks (1,1), (2,3), (3,2)
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 3.0], vec![3.0, 2.0]]).unwrap();
        let u = pseudo_observations(&m).unwrap();
        assert!((empirical_copula(&u, &[0.6, 0.6]).unwrap().get() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_copula(&u, &[1.0, 1.0]).unwrap().get(), 1.0);
        assert_eq!(empirical_copula(&u, &[0.2, 1.0]).unwrap().get(), 0.0);
        // right-continuous: the jump is included at the atom
        assert!((empirical_copula(&u, &[0.25, 0.25]).unwrap().get() - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ranks_match_brute_force(x in prop::collection::vec(prop::sample::select(vec![-2.0, -1.0, 0.0, 0.5, 1.0, 7.0]), 1..40)) {
            let r = average_ranks(&x);
            for i in 0..x.len() {
                prop_assert_eq!(r[i], brute_rank(&x, i));
            }
            let n = x.len() as f64;
            prop_assert_eq!(r.iter().sum::<f64>(), n * (n + 1.0) / 2.0);
        }

        #[test]
        fn monotone_transform_invariance(xi in prop::collection::vec(-500i32..500, 2..60)) {
            let x: Vec<f64> = xi.iter().map(|&v| v as f64 / 10.0).collect();
            let a = pseudo_observations(&col_matrix(&x)).unwrap();
            let y: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() * 3.0 - 1.0).collect();
            let b = pseudo_observations(&col_matrix(&y)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn entries_strictly_interior(x in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            let u = pseudo_observations(&col_matrix(&x)).unwrap();
            prop_assert!(u.column(0).iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
