//! Minimal dense linear algebra for small parameter dimensions.
//!
//! The regression paths never exceed a handful of coefficients, so a
//! row-major matrix with Cholesky factorization and cyclic Jacobi
//! eigenvalues covers everything needed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n_cols, other.n_rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n_cols, v.len(), "dimension mismatch");
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// v' M v for square M.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert!(self.is_square() && v.len() == self.n_rows);
        let mut acc = 0.0;
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                acc += v[i] * self[(i, j)] * v[j];
            }
        }
        acc
    }

    /// Symmetric selection of rows and columns `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorizes `m`; fails on a non-positive pivot (no jitter is applied).
    pub fn new(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::numerical("Cholesky requires a square matrix"));
        }
        let n = m.n_rows;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::numerical(
                            "matrix is not positive definite (singular or rank-deficient system)",
                        ));
                    }
                    l[(i, j)] = libm::sqrt(sum);
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(Cholesky { l })
    }

    /// Solves M x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n_rows;
        assert_eq!(b.len(), n);
        // forward: L y = b
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[(i, k)] * y[k];
            }
            y[i] = sum / self.l[(i, i)];
        }
        // backward: L' x = y
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= self.l[(k, i)] * x[k];
            }
            x[i] = sum / self.l[(i, i)];
        }
        x
    }

    /// M^-1 via n solves against unit vectors.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.n_rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        inv
    }
}

/// Jacobi eigendecomposition of a symmetric matrix: eigenvalues and the
/// rotation accumulated into eigenvectors (columns).
fn jacobi(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return Err(Error::numerical("eigendecomposition requires a square matrix"));
    }
    let n = m.n_rows;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius().max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if libm::sqrt(2.0 * off) <= 1e-14 * scale {
            return Ok((a.diagonal(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                if libm::fabs(a[(p, q)]) <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
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
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::numerical("Jacobi eigendecomposition did not converge"))
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let (mut vals, _) = jacobi(m)?;
    vals.sort_unstable_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    Ok(vals)
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
pub fn symmetric_sqrt(m: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = jacobi(m)?;
    let n = m.n_rows();
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        if vals[k] < -1e-10 {
            return Err(Error::numerical(
                "matrix square root requires a positive semidefinite matrix",
            ));
        }
        let r = libm::sqrt(vals[k].max(0.0));
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += r * vecs[(i, k)] * vecs[(j, k)];
            }
        }
    }
    Ok(out)
}
