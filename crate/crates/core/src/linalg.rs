//! Minimal dense linear algebra for small matrices.
//!
//! The controllers only ever touch Laplacians of a handful of agents and
//! low-dimensional plant matrices, so everything here is a straightforward
//! row-major implementation: a cyclic Jacobi eigensolver for symmetric
//! matrices and a scaling-and-squaring matrix exponential. Both are
//! deterministic; no external solver is involved.

use thiserror::Error;

/// Off-diagonal magnitude below which the Jacobi iteration is converged.
const JACOBI_OFF_TOL: f64 = 1e-12;

/// Maximum number of full Jacobi sweeps before giving up.
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must be symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("matrix contains a non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(LinalgError::RaggedRows {
                    row: i,
                    got: row.len(),
                    expected: n_cols,
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite { i, j });
                }
                data.push(v);
            }
        }
        Ok(Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
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

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
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

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::Dimension(format!(
                "cannot apply {}x{} to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn symmetry_defect(&self) -> Option<(usize, usize, f64)> {
        if !self.is_square() {
            return None;
        }
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let diff = (self[(i, j)] - self[(j, i)]).abs();
                if diff > worst.map_or(0.0, |w| w.2) {
                    worst = Some((i, j, diff));
                }
            }
        }
        worst.filter(|w| w.2 > 0.0)
    }

    fn check_symmetric(&self) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let tol = 1e-12 * self.inf_norm().max(1.0);
        if let Some((i, j, diff)) = self.symmetry_defect() {
            if diff > tol {
                return Err(LinalgError::NotSymmetric { i, j, diff });
            }
        }
        Ok(())
    }

    fn scale(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v += *w;
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations, sorted
/// ascending. Converged when every off-diagonal entry is below 1e-12.
pub fn jacobi_eigenvalues(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    m.check_symmetric()?;
    let n = m.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let mut a = m.clone();
    // Symmetrize exactly so rotations preserve symmetry bit-for-bit.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off < JACOBI_OFF_TOL {
            let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
            return Ok(eigs);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < JACOBI_OFF_TOL {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                // Smaller root of t^2 + 2*tau*t - 1 = 0 for stability.
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS))
}

/// Matrix exponential via scaling and squaring with a Taylor core.
///
/// The argument is halved until its infinity norm is at most 0.5, the series
/// is summed until the term norm falls below 1e-16 relative to the partial
/// sum, and the result is squared back up. Plenty for the small,
/// well-conditioned matrices this crate feeds it.
pub fn expm(a: &Matrix) -> Result<Matrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let norm = a.inf_norm();
    if !norm.is_finite() {
        return Err(LinalgError::NonFinite { i: 0, j: 0 });
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a.scale(0.5f64.powi(squarings as i32));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=64u32 {
        term = term.matmul(&b)?.scale(1.0 / f64::from(k));
        sum = sum.add(&term);
        if term.inf_norm() <= 1e-16 * sum.inf_norm() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = result.matmul(&result)?;
    }
    Ok(result)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn jacobi_diagonal_matrix_is_its_own_spectrum() {
        let m = Matrix::from_rows(vec![vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let eigs = jacobi_eigenvalues(&m).unwrap();
        assert_eq!(eigs, vec![-1.0, 3.0]);
    }

    #[test]
    fn jacobi_2x2_known_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eigs = jacobi_eigenvalues(&m).unwrap();
        assert_close(eigs[0], 1.0, 1e-12);
        assert_close(eigs[1], 3.0, 1e-12);
    }

    #[test]
    fn jacobi_ring_laplacian_matches_circulant_formula() {
        let n = 7usize;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            l[(i, i)] = 2.0;
            l[(i, (i + 1) % n)] = -1.0;
            l[(i, (i + n - 1) % n)] = -1.0;
        }
        let eigs = jacobi_eigenvalues(&l).unwrap();
        let mut expected: Vec<f64> = (0..n)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in eigs.iter().zip(&expected) {
            assert_close(*got, *want, 1e-9);
        }
    }

    #[test]
    fn jacobi_rejects_asymmetric_input() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            jacobi_eigenvalues(&m),
            Err(LinalgError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Matrix::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn expm_of_diagonal_exponentiates_entries() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let e = expm(&m).unwrap();
        assert_close(e[(0, 0)], 1f64.exp(), 1e-12);
        assert_close(e[(1, 1)], (-2f64).exp(), 1e-12);
        assert_close(e[(0, 1)], 0.0, 1e-14);
    }

    #[test]
    fn expm_upper_triangular_with_repeated_eigenvalue() {
        // exp([[1, 0.3], [0, 1]]) = e * [[1, 0.3], [0, 1]].
        let m = Matrix::from_rows(vec![vec![1.0, 0.3], vec![0.0, 1.0]]).unwrap();
        let e = expm(&m).unwrap();
        let ee = 1f64.exp();
        assert_close(e[(0, 0)], ee, 1e-12);
        assert_close(e[(0, 1)], 0.3 * ee, 1e-12);
        assert_close(e[(1, 0)], 0.0, 1e-14);
        assert_close(e[(1, 1)], ee, 1e-12);
    }

    #[test]
    fn expm_inverse_relation() {
        let m = Matrix::from_rows(vec![vec![0.2, 0.5], vec![-0.3, 0.1]]).unwrap();
        let neg = m.scale(-1.0);
        let product = expm(&m).unwrap().matmul(&expm(&neg).unwrap()).unwrap();
        let id = Matrix::identity(2);
        for i in 0..2 {
            for j in 0..2 {
                assert_close(product[(i, j)], id[(i, j)], 1e-12);
            }
        }
    }
}
