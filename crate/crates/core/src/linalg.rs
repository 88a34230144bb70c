//! Dense row-major matrices and the handful of kernels the learners need.
//!
//! Everything here runs in a fixed loop order so a given input produces the
//! same bits on every call.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{contract, Error, Result};
use crate::scalar::Real;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// Wraps row-major `data`; rejects a length mismatch or non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(contract(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(contract(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows, mostly for tests and small literals.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(contract("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutable views of two distinct rows.
    pub fn two_rows_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        assert!(a != b, "rows must differ");
        let cols = self.cols;
        if a < b {
            let (lo, hi) = self.data.split_at_mut(b * cols);
            (&mut lo[a * cols..(a + 1) * cols], &mut hi[..cols])
        } else {
            let (lo, hi) = self.data.split_at_mut(a * cols);
            (&mut hi[..cols], &mut lo[b * cols..(b + 1) * cols])
        }
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[T]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ`, i.e. the matrix of row inner products. This is how
    /// `Z = Y Xᵀ` and `W = X Xᵀ` are formed.
    pub fn mul_transpose(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                op: "mul_transpose",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        Ok(Self::from_fn(self.rows, rhs.rows, |i, j| {
            dot(self.row(i), rhs.row(j))
        }))
    }

    /// `selfᵀ · rhs`.
    pub fn transpose_mul(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "transpose_mul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    fn zip_with(&self, rhs: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * k).collect(),
        }
    }

    /// `Σ a_ij²`, i.e. `tr(AᵀA)`.
    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn row_norm_sq(&self, i: usize) -> T {
        self.row(i).iter().map(|&v| v * v).sum()
    }

    /// Appends zero columns; used by the padding-invariance checks.
    pub fn pad_columns(&self, extra: usize) -> Self {
        let cols = self.cols + extra;
        Self::from_fn(self.rows, cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                T::zero()
            }
        })
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Training data: one signal per column.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    y: Matrix<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(y: Matrix<T>) -> Result<Self> {
        if y.cols() < y.rows() {
            return Err(contract(format!(
                "dataset needs at least as many samples as dimensions ({} < {})",
                y.cols(),
                y.rows()
            )));
        }
        Ok(Self { y })
    }

    #[inline]
    pub fn y(&self) -> &Matrix<T> {
        &self.y
    }

    /// Signal dimension `n`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.y.rows()
    }

    /// Sample count `N`.
    #[inline]
    pub fn samples(&self) -> usize {
        self.y.cols()
    }

    pub fn into_inner(self) -> Matrix<T> {
        self.y
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues and the matrix whose columns are the matching
/// eigenvectors, in no particular order.
pub fn symmetric_eigen<T: Real>(g: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "symmetric_eigen",
            lhs: g.shape(),
            rhs: g.shape(),
        });
    }
    let mut a = g.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius_sq();
    let scale = T::epsilon() * T::lit(n.max(1) as f64);
    let tol = scale * scale * total;

    let off_diag = |a: &Matrix<T>| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s = s + a[(i, j)] * a[(i, j)];
                }
            }
        }
        s
    };

    let mut converged = n < 2 || off_diag(&a) <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
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
        converged = off_diag(&a) <= tol;
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok((values, v))
}

/// Orthonormal eigenvectors of `Y Yᵀ`, sorted by descending eigenvalue.
///
/// Each column is sign-fixed so its first non-negligible entry is positive.
/// Columns whose eigenvalues tie are ordered by the row of that entry.
pub fn left_singular_basis<T: Real>(y: &Matrix<T>) -> Result<Matrix<T>> {
    let g = y.mul_transpose(y)?;
    let n = g.rows();
    let (values, mut vecs) = symmetric_eigen(&g)?;

    let negligible = T::epsilon().sqrt();
    let mut lead = vec![0usize; n];
    for (j, lead_j) in lead.iter_mut().enumerate() {
        let first = (0..n).find(|&i| vecs[(i, j)].abs() > negligible).unwrap_or(0);
        *lead_j = first;
        if vecs[(first, j)] < T::zero() {
            for i in 0..n {
                vecs[(i, j)] = -vecs[(i, j)];
            }
        }
    }

    let scale = values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let tie = T::lit(64.0) * T::epsilon() * scale.max(T::min_positive_value());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    // Regroup runs of tied eigenvalues by leading row.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[order[start]] - values[order[end]]).abs() <= tie {
            end += 1;
        }
        order[start..end].sort_by_key(|&j| lead[j]);
        start = end;
    }

    Ok(Matrix::from_fn(n, n, |i, j| vecs[(i, order[j])]))
}
