//! Column-major dense matrix.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense matrix stored column by column: element `(i, j)` lives at `i + rows * j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("matrix extents must be positive, got {rows}x{cols}")));
        }
        if rows * cols != data.len() {
            return Err(Error::shape(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from row slices; convenient for literals in tests and fixtures.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("ragged rows"));
        }
        Self::from_col_major(r, c, (0..r * c).map(|p| rows[p % r.max(1)][p / r.max(1)]).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "matrix extents must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::shape("columns differ in length"));
        }
        Self::from_col_major(rows, columns.len(), columns.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_diag(diag: &[T]) -> Self {
        Self::from_fn(diag.len(), diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Flat column-major storage.
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.rows)
    }

    /// Sub-matrix made of the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        assert!(!idx.is_empty(), "select at least one column");
        let data = idx.iter().flat_map(|&j| self.col(j).iter().copied()).collect();
        Self { rows: self.rows, cols: idx.len(), data }
    }

    /// Horizontal concatenation.
    pub fn hcat(blocks: &[&Matrix<T>]) -> Result<Self> {
        let rows = blocks.first().ok_or_else(|| Error::invalid("nothing to concatenate"))?.rows;
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::shape("hcat blocks differ in row count"));
        }
        let data = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
        Ok(Self { rows, cols: blocks.iter().map(|b| b.cols).sum(), data })
    }

    /// Vertical concatenation.
    pub fn vcat(blocks: &[&Matrix<T>]) -> Result<Self> {
        let cols = blocks.first().ok_or_else(|| Error::invalid("nothing to concatenate"))?.cols;
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(Error::shape("vcat blocks differ in column count"));
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for b in blocks {
                data.extend_from_slice(b.col(j));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![T::zero(); self.rows * rhs.cols];
        for j in 0..rhs.cols {
            let dst = &mut out[j * self.rows..(j + 1) * self.rows];
            for (p, &w) in rhs.col(j).iter().enumerate() {
                if w == T::zero() {
                    continue;
                }
                for (d, &a) in dst.iter_mut().zip(self.col(p)) {
                    *d += a * w;
                }
            }
        }
        Ok(Self { rows: self.rows, cols: rhs.cols, data: out })
    }

    /// `selfᵀ · rhs` without materialising the transpose.
    pub fn t_matmul(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self::from_fn(self.cols, rhs.cols, |i, j| dot(self.col(i), rhs.col(j))))
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::shape(format!("{}x{} matrix times length-{} vector", self.rows, self.cols, v.len())));
        }
        let mut out = vec![T::zero(); self.rows];
        for (j, &w) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.col(j)) {
                *o += a * w;
            }
        }
        Ok(out)
    }

    /// Elementwise product.
    pub fn hadamard(&self, rhs: &Matrix<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a * b)
    }

    /// Column-wise Kronecker product: column `j` is `self[:, j] ⊗ rhs[:, j]`,
    /// so the row index of `rhs` varies fastest.
    pub fn khatri_rao(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::shape(format!(
                "Khatri-Rao product needs equal column counts, got {} and {}",
                self.cols, rhs.cols
            )));
        }
        let rows = self.rows * rhs.rows;
        let mut data = Vec::with_capacity(rows * self.cols);
        for j in 0..self.cols {
            for &a in self.col(j) {
                data.extend(rhs.col(j).iter().map(|&b| a * b));
            }
        }
        Ok(Self { rows, cols: self.cols, data })
    }

    pub fn zip_with(&self, rhs: &Matrix<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.dims() != rhs.dims() {
            return Err(Error::shape(format!(
                "elementwise operation on {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// Scale column `j` by `s[j]` (right multiplication by `diag(s)`).
    pub fn scale_columns(&self, s: &[T]) -> Self {
        assert_eq!(s.len(), self.cols, "one scale per column");
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s[j])
    }

    pub fn norm_frobenius(&self) -> T {
        norm2(&self.data)
    }

    pub fn column_norms(&self) -> Vec<T> {
        self.columns().map(norm2).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + self.rows * j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + self.rows * j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm, scaled to avoid overflow on large entries.
pub fn norm2<T: Scalar>(v: &[T]) -> T {
    let scale = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    v.iter().map(|&x| (x / scale) * (x / scale)).sum::<T>().sqrt() * scale
}
