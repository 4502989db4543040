//! Small dense row-major matrices.
//!
//! Dimensions in this crate are tiny (a handful of predictors and responses),
//! so everything here is written for clarity over blocking or SIMD.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::from_row_major(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension(format!("ragged rows: {} vs {}", r.len(), cols)));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Outer product `a^T b` of two row vectors.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Matrix::zeros(a.len(), b.len());
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                m[(i, j)] = x * y;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
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

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
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
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `x M`.
    pub fn left_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension(format!(
                "row vector of length {} against {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        Ok(out)
    }

    /// Matrix times column vector: `M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix against vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!("inverse of {}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap_or(col);
            if a[(pivot, col)].abs() <= scale * 1e-14 {
                return Err(Error::Singular(format!("zero pivot in column {}", col)));
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] -= f * a[(col, j)];
                    inv[(r, j)] -= f * inv[(col, j)];
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic
    /// Jacobi rotations. Eigenvalues are returned in ascending order.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, Matrix)> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!("eigen of {}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = Matrix::identity(n);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            let total: f64 = a.data.iter().map(|x| x * x).sum();
            if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
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
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                vectors[(k, new)] = v[(k, old)];
            }
        }
        Ok((values, vectors))
    }

    /// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
    pub fn condition_number_symmetric(&self) -> Result<f64> {
        let (values, _) = self.symmetric_eigen()?;
        let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        Ok(if min == 0.0 { f64::INFINITY } else { max / min })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares solution of `X B = Y` by Householder QR.
///
/// Columns whose diagonal entry in `R` falls below a relative tolerance are
/// reported as collinear instead of being silently dropped.
pub struct LeastSquares {
    pub coefficients: Matrix,
    pub residuals: Matrix,
}

pub fn least_squares(x: &Matrix, y: &Matrix) -> core::result::Result<LeastSquares, Vec<usize>> {
    let (n, p) = x.shape();
    assert_eq!(n, y.rows(), "design and response row counts differ");
    let m = y.cols();
    let mut r = x.clone();
    let mut qty = y.clone();
    let mut col_norms: Vec<f64> = (0..p)
        .map(|j| libm::sqrt((0..n).map(|i| x[(i, j)] * x[(i, j)]).sum()))
        .collect();
    for c in col_norms.iter_mut() {
        if *c == 0.0 {
            *c = 1.0;
        }
    }
    let mut collinear = Vec::new();
    for k in 0..p.min(n) {
        let norm = libm::sqrt((k..n).map(|i| r[(i, k)] * r[(i, k)]).sum());
        if norm <= 1e-10 * col_norms[k] {
            collinear.push(k);
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let s: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                r[(i, j)] -= s * v[i - k];
            }
        }
        for j in 0..m {
            let s: f64 = (k..n).map(|i| v[i - k] * qty[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                qty[(i, j)] -= s * v[i - k];
            }
        }
    }
    if p > n {
        collinear.extend(n..p);
    }
    if !collinear.is_empty() {
        return Err(collinear);
    }
    let mut b = Matrix::zeros(p, m);
    for j in 0..m {
        for k in (0..p).rev() {
            let s: f64 = ((k + 1)..p).map(|l| r[(k, l)] * b[(l, j)]).sum();
            b[(k, j)] = (qty[(k, j)] - s) / r[(k, k)];
        }
    }
    let fitted = x.matmul(&b).expect("shapes checked above");
    let residuals = y.sub(&fitted).expect("shapes checked above");
    Ok(LeastSquares { coefficients: b, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_of_known_matrix() {
        let a = Matrix::from_rows(&[vec![4.0, 7.0], vec![2.0, 6.0]]).unwrap();
        let inv = a.inverse().unwrap();
        assert_abs_diff_eq!(inv[(0, 0)], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(inv[(0, 1)], -0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(inv[(1, 0)], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(inv[(1, 1)], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn singular_inverse_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(a.inverse(), Err(Error::Singular(_))));
    }

    #[test]
    fn jacobi_recovers_eigenvalues() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 5.0]])
            .unwrap();
        let (vals, vecs) = a.symmetric_eigen().unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 5.0, epsilon = 1e-12);
        let rebuilt = vecs.matmul(&Matrix::diag(&vals)).unwrap().matmul(&vecs.transpose()).unwrap();
        assert!(rebuilt.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn least_squares_flags_duplicate_column() {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 2.0, 4.0],
            vec![1.0, 3.0, 6.0],
            vec![1.0, 4.0, 8.0],
        ])
        .unwrap();
        let y = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(least_squares(&x, &y).err(), Some(vec![2]));
    }

    #[test]
    fn least_squares_exact_fit() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![5.0]]).unwrap();
        let fit = least_squares(&x, &y).ok().unwrap();
        assert_abs_diff_eq!(fit.coefficients[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[(1, 0)], 2.0, epsilon = 1e-12);
        assert!(fit.residuals.frobenius_norm() < 1e-12);
    }
}
