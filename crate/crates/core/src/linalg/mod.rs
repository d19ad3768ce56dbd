//! Matrix factorisations and constrained least squares.

mod nnls;
mod qr;
mod svd;

pub use nnls::{nnls, nnls_gram, nnls_multi, DUAL_TOL};
pub use qr::{qr, QrResult};
pub use svd::{svd, SvdResult};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Moore–Penrose pseudoinverse.
///
/// Singular values at or below `tol` are treated as zero; `None` selects
/// `max(rows, cols) · ε · s_max`.
pub fn pinv<T: Scalar>(m: &Matrix<T>, tol: Option<T>) -> Result<Matrix<T>> {
    let f = svd(m)?;
    let cutoff = tol.unwrap_or_else(|| f.default_tol());
    let inv: Vec<T> = f.s.iter().map(|&s| if s > cutoff { T::one() / s } else { T::zero() }).collect();
    f.v.scale_columns(&inv).matmul(&f.u.transpose())
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_error<T: Scalar>(q: &Matrix<T>) -> T {
    q.t_matmul(q).expect("square Gram").sub(&Matrix::identity(q.cols())).expect("same dims").norm_frobenius()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) use super::orthonormality_error;

    pub(crate) fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = crate::rng::stream(seed, "linalg-test");
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn pinv_of_identity_and_singular_diagonal() {
        assert!(close(&pinv(&Matrix::identity(3), None).unwrap(), &Matrix::identity(3), 1e-15));
        let p = pinv(&Matrix::from_diag(&[2.0, 0.0]), None).unwrap();
        assert!(close(&p, &Matrix::from_diag(&[0.5, 0.0]), 1e-15));
    }

    #[test]
    fn pinv_left_inverse_of_full_rank_tall_matrix() {
        let a = random_matrix(4, 2, 9);
        let p = pinv(&a, None).unwrap();
        assert!(close(&p.matmul(&a).unwrap(), &Matrix::identity(2), 1e-8));
    }

    #[test]
    fn moore_penrose_identities_and_involution() {
        for seed in 0..10 {
            let a = random_matrix(5, 3, seed);
            let p = pinv(&a, None).unwrap();
            let ap = a.matmul(&p).unwrap();
            let pa = p.matmul(&a).unwrap();
            assert!(close(&ap.matmul(&a).unwrap(), &a, 1e-8));
            assert!(close(&pa.matmul(&p).unwrap(), &p, 1e-8));
            assert!(close(&ap.transpose(), &ap, 1e-8));
            assert!(close(&pa.transpose(), &pa, 1e-8));
            assert!(close(&pinv(&p, None).unwrap(), &a, 1e-8));
        }
    }

    #[test]
    fn explicit_tolerance_truncates() {
        let p = pinv(&Matrix::from_diag(&[4.0, 1e-3]), Some(1e-2)).unwrap();
        assert!(close(&p, &Matrix::from_diag(&[0.25, 0.0]), 1e-15));
    }
}
