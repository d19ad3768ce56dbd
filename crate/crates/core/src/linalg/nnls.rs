//! Non-negative least squares, Lawson–Hanson active set.
//!
//! The solver works on the normal equations `AᵀA`, `Aᵀy`; the sub-problems on
//! the passive set are then only `|P| × |P|`, which keeps the many-column,
//! few-unknown problems of the decompositions cheap.

use crate::error::{Error, Result};
use crate::linalg::pinv;
use crate::scalar::Scalar;
use crate::tensor::{dot, Matrix};

/// Dual feasibility tolerance, relative to `max(1, ‖Aᵀy‖_∞)`.
pub const DUAL_TOL: f64 = 1e-10;

/// `argmin_{x ≥ 0} ‖a·x − y‖₂`.
pub fn nnls<T: Scalar>(a: &Matrix<T>, y: &[T]) -> Result<Vec<T>> {
    if a.rows() != y.len() {
        return Err(Error::shape(format!("design has {} rows but rhs has length {}", a.rows(), y.len())));
    }
    if !a.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let ata = a.t_matmul(a)?;
    let aty: Vec<T> = a.columns().map(|c| dot(c, y)).collect();
    nnls_gram(&ata, &aty)
}

/// Solve every column of `ys` independently; column `j` of the result
/// solves for column `j` of `ys`.
pub fn nnls_multi<T: Scalar>(a: &Matrix<T>, ys: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows() != ys.rows() {
        return Err(Error::shape(format!("design has {} rows but rhs has {}", a.rows(), ys.rows())));
    }
    if !a.is_finite() || !ys.is_finite() {
        return Err(Error::NonFinite);
    }
    let ata = a.t_matmul(a)?;
    let aty = a.t_matmul(ys)?;
    let cols = aty.columns().map(|rhs| nnls_gram(&ata, rhs)).collect::<Result<Vec<_>>>()?;
    Matrix::from_columns(&cols)
}

/// Lawson–Hanson on precomputed normal equations.
///
/// Fails with [`Error::NnlsNonConvergence`] after `3 · n` outer iterations.
pub fn nnls_gram<T: Scalar>(ata: &Matrix<T>, aty: &[T]) -> Result<Vec<T>> {
    let n = aty.len();
    if ata.dims() != (n, n) {
        return Err(Error::shape(format!("Gram matrix is {}x{}, expected {n}x{n}", ata.rows(), ata.cols())));
    }
    let scale = aty.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tol = T::of(DUAL_TOL) * scale;
    let cap = 3 * n;

    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let mut blocked = vec![false; n];
    let mut w = dual(ata, aty, &x);
    let mut iterations = 0;

    loop {
        let candidate = (0..n)
            .filter(|&i| !passive[i] && !blocked[i] && w[i] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).expect("finite dual").then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        iterations += 1;
        if iterations > cap {
            return Err(Error::NnlsNonConvergence { iterations: cap });
        }
        passive[j] = true;

        let mut s = solve_passive(ata, aty, &passive);
        if s[j] <= T::zero() {
            // the entering variable would not move off its bound
            passive[j] = false;
            blocked[j] = true;
            continue;
        }
        while let Some((alpha, hit)) = step_to_boundary(&x, &s, &passive) {
            for (xi, &si) in x.iter_mut().zip(&s) {
                *xi += alpha * (si - *xi);
            }
            x[hit] = T::zero();
            for i in 0..n {
                if passive[i] && x[i] <= T::zero() {
                    passive[i] = false;
                    x[i] = T::zero();
                }
            }
            s = solve_passive(ata, aty, &passive);
        }
        x = s;
        blocked.iter_mut().for_each(|b| *b = false);
        w = dual(ata, aty, &x);
    }
    Ok(x)
}

/// `Aᵀy − AᵀA·x`, the negative gradient of `½‖Ax − y‖²`.
fn dual<T: Scalar>(ata: &Matrix<T>, aty: &[T], x: &[T]) -> Vec<T> {
    let ax = ata.matvec(x).expect("square Gram matrix");
    aty.iter().zip(ax).map(|(&b, g)| b - g).collect()
}

/// Unconstrained least squares restricted to the passive set, zero elsewhere.
fn solve_passive<T: Scalar>(ata: &Matrix<T>, aty: &[T], passive: &[bool]) -> Vec<T> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let mut s = vec![T::zero(); passive.len()];
    if idx.is_empty() {
        return s;
    }
    let sub = Matrix::from_fn(idx.len(), idx.len(), |i, j| ata[(idx[i], idx[j])]);
    let rhs: Vec<T> = idx.iter().map(|&i| aty[i]).collect();
    let sol = pinv(&sub, None).and_then(|p| p.matvec(&rhs)).expect("finite sub-problem");
    for (&i, v) in idx.iter().zip(sol) {
        s[i] = v;
    }
    s
}

/// Largest step from `x` towards `s` that keeps the passive variables
/// feasible, or `None` when `s` is already feasible.
fn step_to_boundary<T: Scalar>(x: &[T], s: &[T], passive: &[bool]) -> Option<(T, usize)> {
    (0..x.len())
        .filter(|&i| passive[i] && s[i] <= T::zero())
        .map(|i| (x[i] / (x[i] - s[i]), i))
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite step").then(a.1.cmp(&b.1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tests::random_matrix;

    #[test]
    fn identity_design_projects_onto_orthant() {
        let i2 = Matrix::<f64>::identity(2);
        assert_eq!(nnls(&i2, &[3.0, -2.0]).unwrap(), vec![3.0, 0.0]);
        assert_eq!(nnls(&i2, &[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(nnls(&Matrix::<f64>::identity(2), &[1.0]), Err(Error::Shape(_))));
        assert!(nnls_multi(&Matrix::<f64>::identity(2), &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(matches!(nnls(&Matrix::<f64>::identity(1), &[f64::INFINITY]), Err(Error::NonFinite)));
    }

    #[test]
    fn kkt_conditions_on_random_problems() {
        for seed in 0..50 {
            let a = random_matrix(8, 4, seed);
            let y = random_matrix(8, 1, seed + 1000).into_data();
            let x = nnls(&a, &y).unwrap();
            let r: Vec<f64> = a.matvec(&x).unwrap().iter().zip(&y).map(|(p, q)| p - q).collect();
            let g: Vec<f64> = a.columns().map(|c| dot(c, &r)).collect();
            for i in 0..4 {
                assert!(x[i] >= 0.0);
                assert!(g[i] >= -1e-8, "seed {seed}: g = {g:?}");
                assert!((x[i] * g[i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn multi_matches_column_loop() {
        let a = random_matrix(7, 3, 3);
        let ys = random_matrix(7, 4, 4);
        let x = nnls_multi(&a, &ys).unwrap();
        for j in 0..4 {
            assert_eq!(x.col(j), nnls(&a, ys.col(j)).unwrap().as_slice());
        }
        let single = nnls_multi(&a, &Matrix::from_col_major(7, 1, ys.col(0).to_vec()).unwrap()).unwrap();
        assert_eq!(single.col(0), x.col(0));
        let twin = Matrix::hcat(&[&ys.select_columns(&[1]), &ys.select_columns(&[1])]).unwrap();
        let xt = nnls_multi(&a, &twin).unwrap();
        assert_eq!(xt.col(0), xt.col(1));
    }

    #[test]
    fn collinear_columns_do_not_stall() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let x = nnls(&a, &[3.0, 4.0, 1.0]).unwrap();
        let fit = a.matvec(&x).unwrap();
        assert!(fit.iter().zip([3.0f64, 4.0, 1.0]).all(|(p, q)| (p - q).abs() < 1e-9));
    }
}
