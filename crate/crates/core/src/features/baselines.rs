//! Matrix-method baselines for common/individual separation of a list of
//! blocks `X_1 .. X_N`.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::decomp::random_unit_vector;
use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{dot, norm2, Matrix};

/// Rank-`M` factorisation `[X_1; ..; X_N] ≈ A_I A_Cᵀ` of the blocks stacked
/// along rows.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedPca<T> {
    /// `A_C`: shared `cols × M` loadings with orthonormal columns.
    pub loadings: Matrix<T>,
    /// `A_I`: `(Σ rows_n) × M` scores, block `n` occupying its own rows.
    pub scores: Matrix<T>,
    /// Every singular value of the stacked matrix, descending.
    pub singular_values: Vec<T>,
    pub block_rows: Vec<usize>,
}

impl<T: Scalar> StackedPca<T> {
    pub fn rank(&self) -> usize {
        self.loadings.cols()
    }

    /// Fraction of the squared Frobenius norm captured by the kept components.
    pub fn explained(&self) -> T {
        let total: T = self.singular_values.iter().map(|&s| s * s).sum();
        if total == T::zero() {
            return T::one();
        }
        self.singular_values[..self.rank()].iter().map(|&s| s * s).sum::<T>() / total
    }

    /// Rows of `scores` belonging to block `n`.
    pub fn block_scores(&self, n: usize) -> Result<Matrix<T>> {
        let rows = *self.block_rows.get(n).ok_or(Error::OutOfRange { index: n, extent: self.block_rows.len() })?;
        let start: usize = self.block_rows[..n].iter().sum();
        Ok(Matrix::from_fn(rows, self.rank(), |i, j| self.scores[(start + i, j)]))
    }
}

pub fn stacked_pca<T: Scalar>(xs: &[Matrix<T>], rank: usize) -> Result<StackedPca<T>> {
    let first = xs.first().ok_or_else(|| Error::invalid("no blocks to stack"))?;
    if let Some(bad) = xs.iter().find(|x| x.cols() != first.cols()) {
        return Err(Error::shape(format!("blocks have {} and {} columns", first.cols(), bad.cols())));
    }
    let stacked = Matrix::vcat(&xs.iter().collect::<Vec<_>>())?;
    let f = svd(&stacked)?;
    if rank == 0 || rank > f.s.len() {
        return Err(Error::invalid(format!("rank must lie in 1..={}, got {rank}", f.s.len())));
    }
    let kept = f.truncate(rank);
    Ok(StackedPca {
        loadings: kept.v,
        scores: kept.u.scale_columns(&kept.s),
        singular_values: f.s,
        block_rows: xs.iter().map(Matrix::rows).collect(),
    })
}

const DEFLATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommonBasisConfig {
    pub m_max: usize,
    /// Acceptance threshold on the cost; `None` means `0.01 · N`.
    pub threshold: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CommonBasisConfig {
    fn default() -> Self {
        Self { m_max: 1, threshold: None, max_iter: 200, tol: 1e-9, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommonBasis<T> {
    /// Accepted unit vectors `a_1 .. a_M`, mutually orthogonal.
    pub components: Vec<Vec<T>>,
    /// Final cost of each accepted component.
    pub residual_costs: Vec<T>,
    /// Cost after every alternating step, one list per attempted component
    /// (the last list belongs to the rejected one, if any).
    pub cost_history: Vec<Vec<T>>,
}

impl<T: Scalar> CommonBasis<T> {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `I × M` matrix of the accepted components, `None` if nothing was accepted.
    pub fn basis(&self) -> Option<Matrix<T>> {
        Matrix::from_columns(&self.components).ok()
    }
}

/// Orthonormal basis for the column space of `x`, `None` if `x` is numerically
/// zero. Singular values below `rel_tol · s_max` (default tolerance if `None`)
/// are treated as zero.
fn column_space<T: Scalar>(x: &Matrix<T>, rel_tol: Option<T>) -> Result<Option<Matrix<T>>> {
    let f = svd(x)?;
    let tol = match (rel_tol, f.s.first()) {
        (Some(t), Some(&s0)) => t * s0,
        _ => f.default_tol(),
    };
    let r = f.rank(tol);
    if r == 0 || f.s[0] == T::zero() {
        return Ok(None);
    }
    Ok(Some(f.u.select_columns(&(0..r).collect::<Vec<_>>())))
}

/// `Σ_n ‖Q_n z_n − a‖²` with `z_n = Q_nᵀ a`; also returns `Σ_n Q_n z_n`.
fn cost<T: Scalar>(qs: &[Option<Matrix<T>>], a: &[T]) -> (T, Vec<T>) {
    let mut total = T::zero();
    let mut sum = vec![T::zero(); a.len()];
    for q in qs {
        let proj = match q {
            Some(q) => {
                let z: Vec<T> = q.columns().map(|c| dot(c, a)).collect();
                q.matvec(&z).expect("basis and coefficients agree")
            }
            None => vec![T::zero(); a.len()],
        };
        total += proj.iter().zip(a).map(|(&p, &x)| (p - x) * (p - x)).sum::<T>();
        sum.iter_mut().zip(&proj).for_each(|(s, &p)| *s += p);
    }
    (total, sum)
}

/// Common orthonormal directions shared by the column spaces of all blocks.
///
/// Each block is replaced by an orthonormal basis `Q_n` of its column space.
/// For one component the cost `J(a) = Σ_n ‖Q_n z_n − a‖²` is minimised by
/// alternating `z_n = Q_nᵀ a` with `a = normalised mean of Q_n z_n`, which
/// never increases `J`. The component is accepted while `J < threshold`,
/// after which `a` is projected out of every `Q_n` and the search repeats, up
/// to `m_max` components.
pub fn common_basis_qr<T: Scalar>(xs: &[Matrix<T>], cfg: &CommonBasisConfig) -> Result<CommonBasis<T>> {
    let first = xs.first().ok_or_else(|| Error::invalid("no blocks"))?;
    let rows = first.rows();
    if let Some(bad) = xs.iter().find(|x| x.rows() != rows) {
        return Err(Error::shape(format!("blocks have {rows} and {} rows", bad.rows())));
    }
    if cfg.m_max == 0 {
        return Err(Error::invalid("m_max must be at least 1"));
    }
    let threshold = T::of(cfg.threshold.unwrap_or(0.01 * xs.len() as f64));
    let tol = T::of(cfg.tol);

    let mut qs = xs.iter().map(|x| column_space(x, None)).collect::<Result<Vec<_>>>()?;
    let mut out = CommonBasis { components: Vec::new(), residual_costs: Vec::new(), cost_history: Vec::new() };

    for m in 0..cfg.m_max {
        let mut r = rng::Rng::seed_from_u64(rng::derive_seed(cfg.seed, "common-basis", m as u64));
        let mut a: Vec<T> = random_unit_vector(rows, false, &mut r);
        let mut history = Vec::new();
        let mut j;
        let mut it = 0;
        loop {
            let (jc, sum) = cost(&qs, &a);
            j = jc;
            let stalled = history.last().is_some_and(|&p: &T| (p - j).abs() <= tol * p.max(T::epsilon()));
            history.push(j);
            it += 1;
            if stalled || it >= cfg.max_iter.max(1) {
                break;
            }
            let mut next = sum;
            for prev in &out.components {
                let d = dot(prev, &next);
                next.iter_mut().zip(prev).for_each(|(x, &p)| *x -= d * p);
            }
            let n = norm2(&next);
            if n.is_nan() || n <= T::zero() {
                break;
            }
            a = next.into_iter().map(|x| x / n).collect();
        }
        out.cost_history.push(history);
        if j.is_nan() || j >= threshold {
            break;
        }
        for q in qs.iter_mut() {
            if let Some(basis) = q {
                let coef: Vec<T> = basis.columns().map(|c| dot(c, &a)).collect();
                let deflated = Matrix::from_fn(basis.rows(), basis.cols(), |i, k| basis[(i, k)] - a[i] * coef[k]);
                // Projecting out a direction that lies in the span leaves a
                // rounding-level remnant of it; cut that off explicitly.
                *q = column_space(&deflated, Some(T::of(DEFLATION_TOL)))?;
            }
        }
        out.components.push(a);
        out.residual_costs.push(j);
    }
    Ok(out)
}
