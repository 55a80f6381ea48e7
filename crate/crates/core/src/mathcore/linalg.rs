//! Small dense matrices: Cholesky, symmetric eigen-decomposition (Jacobi) and
//! the correlation-matrix type with its PSD repair.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::MathError;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MathError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(MathError::Dimension("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps row-major `data` of length `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::Dimension(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    /// Row-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, MathError> {
        if self.cols != other.rows {
            return Err(MathError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = MathError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, MathError> {
        Matrix::from_rows(&rows)
    }
}

/// Lower Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

/// Factorizes a symmetric positive-definite matrix. A non-positive pivot is
/// reported with its (zero-based) index.
pub fn cholesky(a: &Matrix) -> Result<Cholesky, MathError> {
    if !a.is_square() {
        return Err(MathError::Dimension("cholesky needs a square matrix".into()));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(MathError::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(Cholesky { l })
}

impl Cholesky {
    /// Wraps an existing lower-triangular factor with a positive diagonal.
    pub fn from_lower(l: Matrix) -> Result<Self, MathError> {
        if !l.is_square() {
            return Err(MathError::Dimension("cholesky factor must be square".into()));
        }
        for i in 0..l.rows() {
            if !(l[(i, i)] > 0.0) {
                return Err(MathError::NotPositiveDefinite { pivot: i });
            }
            if (i + 1..l.cols()).any(|j| l[(i, j)] != 0.0) {
                return Err(MathError::Domain("cholesky factor must be lower triangular".into()));
            }
        }
        Ok(Self { l })
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| (0..=i.min(j)).map(|k| self.l[(i, k)] * self.l[(j, k)]).sum())
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn into_factor(self) -> Matrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// ln det A = 2 Σ ln L_ii.
    pub fn ln_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// xᵀ A⁻¹ x, via a forward solve.
    pub fn quad_form_inv(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend_from_slice(x);
        self.forward_solve(scratch);
        scratch.iter().map(|v| v * v).sum()
    }

    /// `L z`.
    pub fn lower_mul(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.l[(i, k)] * z[k];
            }
            out[i] = s;
        }
    }

    /// A⁻¹.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.forward_solve(&mut col);
            // back substitution with Lᵀ
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in i + 1..n {
                    s -= self.l[(k, i)] * col[k];
                }
                col[i] = s / self.l[(i, i)];
            }
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Eigenvalues and column eigenvectors of a symmetric matrix (cyclic Jacobi).
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), MathError> {
    if !a.is_symmetric(1e-12) {
        return Err(MathError::Dimension("eigen-decomposition needs a symmetric matrix".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| m[(i, i)]).collect(), v))
}

/// Symmetric, unit-diagonal, positive-definite matrix with entries in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct CorrelationMatrix(Matrix);

/// What [`CorrelationMatrix::repair`] did to its input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub repaired: bool,
    pub min_eigenvalue: f64,
}

pub const EIGEN_FLOOR: f64 = 1e-10;

impl CorrelationMatrix {
    pub fn new(m: Matrix) -> Result<Self, MathError> {
        if !m.is_square() {
            return Err(MathError::Dimension("correlation matrix must be square".into()));
        }
        if !m.is_symmetric(1e-12) {
            return Err(MathError::Domain("correlation matrix is not symmetric".into()));
        }
        let n = m.rows();
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(MathError::Domain(format!("diagonal entry {i} is {} not 1", m[(i, i)])));
            }
            for j in 0..n {
                if !(m[(i, j)].abs() <= 1.0) {
                    return Err(MathError::Domain(format!("entry ({i},{j}) = {} outside [-1,1]", m[(i, j)])));
                }
            }
        }
        cholesky(&m)?;
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    /// Bivariate correlation matrix with off-diagonal `rho`.
    pub fn bivariate(rho: f64) -> Result<Self, MathError> {
        Self::new(Matrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]])?)
    }

    /// Equicorrelation matrix of dimension `n`.
    pub fn exchangeable(n: usize, rho: f64) -> Result<Self, MathError> {
        Self::new(Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho }))
    }

    /// Accepts a symmetric matrix with (near-)unit diagonal; when it is not
    /// positive definite, eigenvalues are clipped at [`EIGEN_FLOOR`] and the
    /// result rescaled to unit diagonal.
    pub fn repair(m: &Matrix) -> Result<(Self, RepairReport), MathError> {
        if !m.is_symmetric(1e-9) {
            return Err(MathError::Domain("cannot repair a non-symmetric matrix".into()));
        }
        let n = m.rows();
        let sym = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                (0.5 * (m[(i, j)] + m[(j, i)])).clamp(-1.0, 1.0)
            }
        });
        let (vals, vecs) = symmetric_eigen(&sym)?;
        let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig > EIGEN_FLOOR && cholesky(&sym).is_ok() {
            return Ok((Self(sym), RepairReport { repaired: false, min_eigenvalue: min_eig }));
        }
        let clipped: Vec<f64> = vals.iter().map(|v| v.max(EIGEN_FLOOR)).collect();
        let mut rebuilt = Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| vecs[(i, k)] * clipped[k] * vecs[(j, k)]).sum()
        });
        let scale: Vec<f64> = (0..n).map(|i| rebuilt[(i, i)].sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                rebuilt[(i, j)] = if i == j {
                    1.0
                } else {
                    (rebuilt[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0)
                };
            }
        }
        // symmetrize exactly
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
                rebuilt[(i, j)] = v;
                rebuilt[(j, i)] = v;
            }
        }
        let out = Self::new(rebuilt)?;
        Ok((out, RepairReport { repaired: true, min_eigenvalue: min_eig }))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn cholesky(&self) -> Cholesky {
        cholesky(&self.0).expect("correlation matrix invariant guarantees a Cholesky factor")
    }

    /// The 2×2 sub-matrix for components `i` and `j`.
    pub fn pair(&self, i: usize, j: usize) -> CorrelationMatrix {
        CorrelationMatrix(Matrix::from_rows(&[vec![1.0, self.get(i, j)], vec![self.get(j, i), 1.0]]).unwrap())
    }

    /// Upper-triangle entries, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }
}

impl TryFrom<Matrix> for CorrelationMatrix {
    type Error = MathError;
    fn try_from(m: Matrix) -> Result<Self, MathError> {
        CorrelationMatrix::new(m)
    }
}

impl From<CorrelationMatrix> for Matrix {
    fn from(c: CorrelationMatrix) -> Self {
        c.0
    }
}
