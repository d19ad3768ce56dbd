//! Dense N-way arrays and the multilinear primitives built on them.
//!
//! Layout: the first index varies fastest, so element `(i_0, .., i_{N-1})`
//! sits at `i_0 + I_0 * (i_1 + I_1 * (i_2 + ..))`. A tensor of order 2 has
//! exactly the storage of the column-major [`Matrix`] with the same extents.
//!
//! Unfolding along mode `n` puts `i_n` on the rows; the remaining modes are
//! laid out on the columns in ascending order with the lowest one varying
//! fastest. For a third-order tensor this gives
//! `X_(0) = A (C ⊙ B)ᵀ`, `X_(1) = B (C ⊙ A)ᵀ`, `X_(2) = C (B ⊙ A)ᵀ`
//! for a CP model, with `⊙` the Khatri-Rao product of [`Matrix::khatri_rao`].
//!
//! Modes are zero-based throughout the API.

mod matrix;

pub use matrix::{dot, norm2, Matrix};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported tensor order.
pub const MAX_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_ORDER {
        return Err(Error::shape(format!("tensor order must be in 1..={MAX_ORDER}, got {}", shape.len())));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("every extent must be positive, got {shape:?}")));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::shape(format!("shape {shape:?} overflows")))
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if len != data.len() {
            return Err(Error::shape(format!("shape {shape:?} needs {len} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![T::zero(); len] })
    }

    /// Fill by evaluating `f` on every multi-index, in storage order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = check_shape(shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, &e) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < e {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Stack equally sized matrices along a new third mode.
    pub fn from_frontal_slices(slices: &[Matrix<T>]) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::invalid("need at least one slice"))?;
        if slices.iter().any(|s| s.dims() != first.dims()) {
            return Err(Error::shape("frontal slices differ in size"));
        }
        let data = slices.iter().flat_map(|s| s.data().iter().copied()).collect();
        Self::new(vec![first.rows(), first.cols(), slices.len()], data)
    }

    pub fn from_matrix(m: &Matrix<T>) -> Self {
        Self { shape: vec![m.rows(), m.cols()], data: m.data().to_vec() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Storage position of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.shape.len() {
            return Err(Error::shape(format!("{}-index into order-{} tensor", idx.len(), self.order())));
        }
        let mut pos = 0;
        for (&i, &e) in idx.iter().zip(&self.shape).rev() {
            if i >= e {
                return Err(Error::OutOfRange { index: i, extent: e });
            }
            pos = pos * e + i;
        }
        Ok(pos)
    }

    pub fn get(&self, idx: &[usize]) -> Result<T> {
        Ok(self.data[self.offset(idx)?])
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::OutOfRange { index: mode, extent: self.order() });
        }
        Ok(())
    }

    /// Mode-`mode` unfolding (matricization).
    pub fn unfold(&self, mode: usize) -> Result<Matrix<T>> {
        self.check_mode(mode)?;
        let left: usize = self.shape[..mode].iter().product();
        let extent = self.shape[mode];
        let right: usize = self.shape[mode + 1..].iter().product();
        let cols = left * right;
        let mut out = vec![T::zero(); extent * cols];
        for r in 0..right {
            for i in 0..extent {
                let src = &self.data[left * (i + extent * r)..left * (i + extent * r + 1)];
                for (l, &v) in src.iter().enumerate() {
                    out[i + extent * (l + left * r)] = v;
                }
            }
        }
        Matrix::from_col_major(extent, cols, out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix<T>, mode: usize, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if mode >= shape.len() {
            return Err(Error::OutOfRange { index: mode, extent: shape.len() });
        }
        if m.rows() != shape[mode] || m.rows() * m.cols() != len {
            return Err(Error::shape(format!(
                "{}x{} matrix cannot fold into {shape:?} along mode {mode}",
                m.rows(),
                m.cols()
            )));
        }
        let left: usize = shape[..mode].iter().product();
        let extent = shape[mode];
        let right: usize = shape[mode + 1..].iter().product();
        let src = m.data();
        let mut data = vec![T::zero(); len];
        for r in 0..right {
            for i in 0..extent {
                let dst = &mut data[left * (i + extent * r)..left * (i + extent * r + 1)];
                for (l, d) in dst.iter_mut().enumerate() {
                    *d = src[i + extent * (l + left * r)];
                }
            }
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// `t ×_mode m`, defined by `(t ×_n M)_(n) = M · t_(n)`.
    pub fn mode_n_product(&self, m: &Matrix<T>, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if m.cols() != self.shape[mode] {
            return Err(Error::shape(format!(
                "mode-{mode} product needs {} matrix columns, got {}",
                self.shape[mode],
                m.cols()
            )));
        }
        let mut shape = self.shape.clone();
        shape[mode] = m.rows();
        Self::fold(&m.matmul(&self.unfold(mode)?)?, mode, &shape)
    }

    /// Frontal slice `X(:, :, q)` of a third-order tensor.
    pub fn frontal_slice(&self, q: usize) -> Result<Matrix<T>> {
        if self.order() != 3 {
            return Err(Error::shape(format!("frontal slices need an order-3 tensor, got order {}", self.order())));
        }
        if q >= self.shape[2] {
            return Err(Error::OutOfRange { index: q, extent: self.shape[2] });
        }
        let n = self.shape[0] * self.shape[1];
        Matrix::from_col_major(self.shape[0], self.shape[1], self.data[q * n..(q + 1) * n].to_vec())
    }

    pub fn frontal_slices(&self) -> Result<Vec<Matrix<T>>> {
        let q = *self.shape.get(2).unwrap_or(&0);
        (0..q).map(|k| self.frontal_slice(k)).collect()
    }

    pub fn norm_frobenius(&self) -> T {
        norm2(&self.data)
    }

    pub fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != rhs.shape {
            return Err(Error::shape(format!("shapes {:?} and {:?} differ", self.shape, rhs.shape)));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Rank-1 tensor `v_0 ∘ v_1 ∘ ..`, element `(i_0, ..)` equal to `Π v_n[i_n]`.
pub fn outer_product<T: Scalar, V: AsRef<[T]>>(vs: &[V]) -> Result<DenseTensor<T>> {
    if vs.len() < 2 {
        return Err(Error::invalid(format!("outer product needs at least two vectors, got {}", vs.len())));
    }
    let shape: Vec<usize> = vs.iter().map(|v| v.as_ref().len()).collect();
    let len = check_shape(&shape)?;
    let mut data = Vec::with_capacity(len);
    data.extend_from_slice(vs[0].as_ref());
    for v in &vs[1..] {
        let prev = std::mem::take(&mut data);
        data.reserve(prev.len() * v.as_ref().len());
        for &x in v.as_ref() {
            data.extend(prev.iter().map(|&p| p * x));
        }
    }
    DenseTensor::new(shape, data)
}

/// Order-3 tensor `Σ_k G_k ∘ c_k` from matrix slices and mixing vectors.
pub fn matrix_outer_sum<T: Scalar>(terms: &[(Matrix<T>, &[T])]) -> Result<DenseTensor<T>> {
    let (g0, c0) = terms.first().ok_or_else(|| Error::invalid("no terms"))?;
    let (o, p, q) = (g0.rows(), g0.cols(), c0.len());
    let n = o * p;
    let mut data = vec![T::zero(); n * q];
    for (g, c) in terms {
        if g.dims() != (o, p) || c.len() != q {
            return Err(Error::shape("terms differ in size"));
        }
        for (k, &ck) in c.iter().enumerate() {
            if ck == T::zero() {
                continue;
            }
            for (d, &x) in data[k * n..(k + 1) * n].iter_mut().zip(g.data()) {
                *d += x * ck;
            }
        }
    }
    DenseTensor::new(vec![o, p, q], data)
}
