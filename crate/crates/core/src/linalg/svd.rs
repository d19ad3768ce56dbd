use crate::error::{Error, Result};
use crate::linalg::qr::qr;
use crate::scalar::Scalar;
use crate::tensor::{dot, norm2, Matrix};

/// Thin singular value decomposition `m = u · diag(s) · vᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    /// `rows × min(rows, cols)`, orthonormal columns.
    pub u: Matrix<T>,
    /// Descending, non-negative.
    pub s: Vec<T>,
    /// `cols × min(rows, cols)`, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// Number of singular values strictly above `tol`.
    pub fn rank(&self, tol: T) -> usize {
        self.s.iter().take_while(|&&s| s > tol).count()
    }

    /// Default rank-truncation threshold `max(rows, cols) · ε · s_max`.
    pub fn default_tol(&self) -> T {
        let dim = self.u.rows().max(self.v.rows());
        T::of(dim as f64) * T::epsilon() * self.s.first().copied().unwrap_or_else(T::zero)
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.u.scale_columns(&self.s).matmul(&self.v.transpose()).expect("consistent factors")
    }

    /// Keep the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.clamp(1, self.s.len());
        let idx: Vec<usize> = (0..k).collect();
        Self { u: self.u.select_columns(&idx), s: self.s[..k].to_vec(), v: self.v.select_columns(&idx) }
    }
}

const MAX_SWEEPS: usize = 100;

/// Thin SVD by one-sided Jacobi rotations.
///
/// Tall inputs are first reduced with a Householder QR so the rotations run
/// on the small triangular factor.
pub fn svd<T: Scalar>(m: &Matrix<T>) -> Result<SvdResult<T>> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        return Ok(SvdResult { u: t.v, s: t.s, v: t.u });
    }
    if m.rows() >= 2 * m.cols() {
        let f = qr(m)?;
        let inner = svd_jacobi(&f.r);
        let u = f.q.matmul(&inner.u)?;
        return Ok(SvdResult { u, s: inner.s, v: inner.v });
    }
    Ok(svd_jacobi(m))
}

/// One-sided Jacobi on a matrix with `rows >= cols`.
fn svd_jacobi<T: Scalar>(m: &Matrix<T>) -> SvdResult<T> {
    let (rows, n) = m.dims();
    let mut u = m.clone();
    let mut v = Matrix::<T>::identity(n);
    let tol = T::iteration_tol();
    let two = T::of(2.0);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(u.col(p), u.col(p));
                let beta = dot(u.col(q), u.col(q));
                let gamma = dot(u.col(p), u.col(q));
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms = u.column_norms();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms").then(a.cmp(&b)));
    let s: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let cutoff = s[0] * T::epsilon() * T::of(rows.max(n) as f64);

    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if s[slot] > cutoff && s[slot] > T::zero() {
            u_cols.push(u.col(j).iter().map(|&x| x / s[slot]).collect());
        } else {
            deficient.push(slot);
            u_cols.push(Vec::new());
        }
    }
    for &slot in &deficient {
        u_cols[slot] = orthogonal_complement_vector(&u_cols, rows);
    }
    let u = Matrix::from_columns(&u_cols).expect("uniform column length");
    let v = v.select_columns(&order);
    SvdResult { u, s, v }
}

fn rotate<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let rows = m.rows();
    for i in 0..rows {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// A unit vector orthogonal to every non-empty column in `basis`.
fn orthogonal_complement_vector<T: Scalar>(basis: &[Vec<T>], rows: usize) -> Vec<T> {
    let filled: Vec<&Vec<T>> = basis.iter().filter(|c| !c.is_empty()).collect();
    let mut best: Option<(T, Vec<T>)> = None;
    for e in 0..rows {
        let mut x = vec![T::zero(); rows];
        x[e] = T::one();
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for b in &filled {
                let proj = dot(&x, b);
                x.iter_mut().zip(b.iter()).for_each(|(xi, &bi)| *xi -= proj * bi);
            }
        }
        let nrm = norm2(&x);
        if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
            best = Some((nrm, x));
        }
        if nrm > T::of(0.5) {
            break;
        }
    }
    let (nrm, x) = best.expect("rows >= 1");
    x.into_iter().map(|xi| xi / nrm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tests::{orthonormality_error, random_matrix};

    #[test]
    fn identity_and_diagonal() {
        let r = svd(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(r.s, vec![1.0, 1.0, 1.0]);
        let r = svd(&Matrix::from_diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(r.s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn reconstructs_random_shapes() {
        for (i, &(r, c)) in [(5, 3), (3, 5), (12, 2), (7, 7), (1, 4), (4, 1)].iter().enumerate() {
            let m = random_matrix(r, c, i as u64);
            let f = svd(&m).unwrap();
            let err = f.reconstruct().sub(&m).unwrap().norm_frobenius() / m.norm_frobenius();
            assert!(err < 1e-10, "{r}x{c}: {err}");
            assert!(orthonormality_error(&f.u) < 1e-10);
            assert!(orthonormality_error(&f.v) < 1e-10);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_input_keeps_orthonormal_u() {
        let a = [1.0, 2.0, -1.0, 0.5];
        let b = [0.3, -0.7, 1.1];
        let m = Matrix::from_fn(4, 3, |i, j| a[i] * b[j]);
        let f = svd(&m).unwrap();
        assert_eq!(f.rank(f.default_tol()), 1);
        assert!(orthonormality_error(&f.u) < 1e-10);
        assert!(f.reconstruct().sub(&m).unwrap().norm_frobenius() < 1e-12);
        let z = svd(&Matrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(z.s, vec![0.0, 0.0]);
        assert!(orthonormality_error(&z.u) < 1e-12);
    }

    #[test]
    fn singular_values_match_characteristic_roots() {
        // 2x2: eigenvalues of MᵀM from the quadratic formula
        let m = Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![-1.0, 3.0]]).unwrap();
        let g = m.t_matmul(&m).unwrap();
        let (tr, det) = (g[(0, 0)] + g[(1, 1)], g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]);
        let disc = (tr * tr / 4.0 - det).sqrt();
        let expect = [(tr / 2.0 + disc).sqrt(), (tr / 2.0 - disc).sqrt()];
        let s = svd(&m).unwrap().s;
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_values_match_cubic_roots() {
        // 3x3: roots of det(λI − MᵀM) by the trigonometric cubic formula
        let m = random_matrix(3, 3, 41);
        let g = m.t_matmul(&m).unwrap();
        let tr = g[(0, 0)] + g[(1, 1)] + g[(2, 2)];
        let minors = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)] + g[(0, 0)] * g[(2, 2)] - g[(0, 2)] * g[(2, 0)]
            + g[(1, 1)] * g[(2, 2)]
            - g[(1, 2)] * g[(2, 1)];
        let det = g[(0, 0)] * (g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)])
            - g[(0, 1)] * (g[(1, 0)] * g[(2, 2)] - g[(1, 2)] * g[(2, 0)])
            + g[(0, 2)] * (g[(1, 0)] * g[(2, 1)] - g[(1, 1)] * g[(2, 0)]);
        // λ³ − tr λ² + minors λ − det = 0, depressed with λ = t + tr/3
        let p = minors - tr * tr / 3.0;
        let q = -2.0 * tr.powi(3) / 27.0 + tr * minors / 3.0 - det;
        let r = 2.0 * (-p / 3.0).sqrt();
        let phi = (3.0 * q / (p * r)).clamp(-1.0, 1.0).acos() / 3.0;
        let mut roots: Vec<f64> =
            (0..3).map(|k| r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + tr / 3.0).collect();
        roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s = svd(&m).unwrap().s;
        for (sv, lam) in s.iter().zip(roots) {
            assert!((sv - lam.max(0.0).sqrt()).abs() < 1e-8, "{sv} vs {}", lam.sqrt());
        }
    }

    #[test]
    fn rejects_non_finite() {
        let m = Matrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap();
        assert!(matches!(svd(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn works_in_single_precision() {
        let m = Matrix::<f32>::from_rows(&[vec![3.0, 0.0], vec![0.0, -2.0], vec![0.0, 0.0]]).unwrap();
        let f = svd(&m).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-6 && (f.s[1] - 2.0).abs() < 1e-6);
    }
}
