//! Comparing recovered factors with reference factors under the usual
//! permutation and scaling indeterminacy.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, norm2, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnMatch<T> {
    pub estimate: usize,
    pub truth: usize,
    /// Absolute cosine between the two columns.
    pub cosine: T,
}

fn abs_cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let d = norm2(a) * norm2(b);
    if d == T::zero() {
        T::zero()
    } else {
        (dot(a, b) / d).abs()
    }
}

/// Greedy maximum-|cosine| assignment of estimate columns to truth columns.
/// Pairs are returned sorted by truth column.
pub fn greedy_match<T: Scalar>(est: &Matrix<T>, truth: &Matrix<T>) -> Result<Vec<ColumnMatch<T>>> {
    if est.rows() != truth.rows() {
        return Err(Error::shape(format!(
            "cannot match {}-row columns against {}-row columns",
            est.rows(),
            truth.rows()
        )));
    }
    let mut pairs: Vec<ColumnMatch<T>> = (0..est.cols())
        .flat_map(|i| (0..truth.cols()).map(move |j| (i, j)))
        .map(|(i, j)| ColumnMatch { estimate: i, truth: j, cosine: abs_cosine(est.col(i), truth.col(j)) })
        .collect();
    pairs.sort_by(|a, b| {
        b.cosine
            .partial_cmp(&a.cosine)
            .expect("finite cosines")
            .then(a.truth.cmp(&b.truth))
            .then(a.estimate.cmp(&b.estimate))
    });
    let mut used_est = vec![false; est.cols()];
    let mut used_truth = vec![false; truth.cols()];
    let mut out = Vec::new();
    for p in pairs {
        if !used_est[p.estimate] && !used_truth[p.truth] {
            used_est[p.estimate] = true;
            used_truth[p.truth] = true;
            out.push(p);
        }
    }
    out.sort_by_key(|p| p.truth);
    Ok(out)
}

/// Smallest absolute cosine over the greedy assignment.
pub fn factor_match_score<T: Scalar>(est: &Matrix<T>, truth: &Matrix<T>) -> Result<T> {
    let m = greedy_match(est, truth)?;
    Ok(m.iter().map(|p| p.cosine).fold(T::one(), T::min))
}

/// For each truth column, `‖s·e − t‖ / ‖t‖` where `e` is the matched estimate
/// column and `s ≥ 0` the best non-negative rescaling.
pub fn scaled_column_errors<T: Scalar>(est: &Matrix<T>, truth: &Matrix<T>) -> Result<Vec<T>> {
    let m = greedy_match(est, truth)?;
    if m.len() < truth.cols() {
        return Err(Error::shape("fewer estimate columns than truth columns"));
    }
    Ok(m.iter()
        .map(|p| {
            let e = est.col(p.estimate);
            let t = truth.col(p.truth);
            let ee = dot(e, e);
            let s = if ee > T::zero() { (dot(e, t) / ee).max(T::zero()) } else { T::zero() };
            let diff: Vec<T> = e.iter().zip(t).map(|(&x, &y)| s * x - y).collect();
            norm2(&diff) / norm2(t)
        })
        .collect())
}
