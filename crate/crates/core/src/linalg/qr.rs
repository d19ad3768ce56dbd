use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, norm2, Matrix};

/// Thin QR factorisation: `q` is `rows × cols` with orthonormal columns,
/// `r` is `cols × cols` upper triangular.
#[derive(Clone, Debug)]
pub struct QrResult<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
}

/// Householder QR of a matrix with `rows >= cols`.
pub fn qr<T: Scalar>(m: &Matrix<T>) -> Result<QrResult<T>> {
    let (rows, cols) = m.dims();
    if rows < cols {
        return Err(Error::shape(format!("QR needs rows >= cols, got {rows}x{cols}")));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut a = m.clone();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(cols);
    for k in 0..cols {
        let x = &a.col(k)[k..];
        let alpha = norm2(x);
        let mut v = x.to_vec();
        if alpha == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        // v = x + sign(x0)·‖x‖·e0 avoids cancellation
        let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
        v[0] += sign * alpha;
        let vn = norm2(&v);
        v.iter_mut().for_each(|vi| *vi /= vn);
        for j in k..cols {
            let col = &mut a.col_mut(j)[k..];
            let proj = dot(&v, col) * T::of(2.0);
            col.iter_mut().zip(&v).for_each(|(c, &vi)| *c -= proj * vi);
        }
        reflectors.push(v);
    }

    let r = Matrix::from_fn(cols, cols, |i, j| if i <= j { a[(i, j)] } else { T::zero() });
    let mut q = Matrix::from_fn(rows, cols, |i, j| if i == j { T::one() } else { T::zero() });
    for (k, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for j in 0..cols {
            let col = &mut q.col_mut(j)[k..];
            let proj = dot(v, col) * T::of(2.0);
            col.iter_mut().zip(v).for_each(|(c, &vi)| *c -= proj * vi);
        }
    }
    Ok(QrResult { q, r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tests::{orthonormality_error, random_matrix};

    #[test]
    fn identity_factors_trivially() {
        let f = qr(&Matrix::<f64>::identity(3)).unwrap();
        for (i, j) in (0..3).flat_map(|i| (0..3).map(move |j| (i, j))) {
            assert!((f.q[(i, j)].abs() - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
        assert!(f.q.matmul(&f.r).unwrap().sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn column_scaled_identity_gives_signed_identity_q() {
        let m = Matrix::<f64>::from_diag(&[2.0, -5.0, 0.5]);
        let f = qr(&m).unwrap();
        for i in 0..3 {
            assert!((f.q[(i, i)].abs() - 1.0).abs() < 1e-15);
            assert!((f.r[(i, i)].abs() - m[(i, i)].abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn random_tall_matrix_reconstructs() {
        let m = random_matrix(6, 3, 5);
        let f = qr(&m).unwrap();
        let err = f.q.matmul(&f.r).unwrap().sub(&m).unwrap().norm_frobenius() / m.norm_frobenius();
        assert!(err < 1e-10);
        assert!(orthonormality_error(&f.q) < 1e-10);
        for j in 0..3 {
            for i in j + 1..3 {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn zero_column_keeps_q_orthonormal() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let f = qr(&m).unwrap();
        assert!(orthonormality_error(&f.q) < 1e-12);
        assert!(f.q.matmul(&f.r).unwrap().sub(&m).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn wide_input_is_rejected() {
        assert!(matches!(qr(&Matrix::<f64>::zeros(2, 3)), Err(Error::Shape(_))));
    }
}
