//! Rank-(L, L, 1) block-term decomposition with a non-negative third mode.
//!
//! `X ≈ Σ_k (A_k diag(λ_k) B_kᵀ) ∘ c_k`, fitted by block-wise alternating
//! least squares. Each sweep visits the terms in order; for term `k` it
//!
//! 1. deflates the data by the current reconstructions of every other term,
//! 2. repeats `c_k` into the `Q × L_k` matrix `C_k`,
//! 3. solves `A_k = R_(0) (C_k ⊙ B_k) (C_kᵀC_k ∗ B_kᵀB_k)^†`,
//! 4. solves `B_k = R_(1) (C_k ⊙ A_k) (C_kᵀC_k ∗ A_kᵀA_k)^†`,
//! 5. refits the whole mixing matrix by non-negative least squares against
//!    `X_(2)`, collapsing every term to its vectorised slice so the repeated
//!    columns of `C_k` stay tied,
//! 6. normalises all columns to unit length, folding the norms into `λ`.
//!
//! Every step is an exact (constrained) least-squares minimiser, so the
//! objective never increases from one sweep to the next.

use crate::decomp::{
    check_order3, leading_left_vectors, normal_matrix, normalize_columns, random_unit_vector, DecompConfig, Diagnostic,
    FitTrace, Fitted, Init, Reconstruct,
};
use crate::error::{Error, Result};
use crate::linalg::{nnls_multi, pinv};
use crate::rng::{self, Rng};
use crate::scalar::Scalar;
use crate::tensor::{matrix_outer_sum, norm2, DenseTensor, Matrix};

/// One term `(A diag(λ) Bᵀ) ∘ c` of multilinear rank `(L, L, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTerm<T> {
    /// `O × L`, unit-norm columns.
    pub a: Matrix<T>,
    /// `P × L`, unit-norm columns.
    pub b: Matrix<T>,
    /// Length `Q`, unit norm, non-negative.
    pub c: Vec<T>,
    /// Length `L`, non-negative.
    pub lambda: Vec<T>,
}

impl<T: Scalar> BlockTerm<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>, c: Vec<T>, lambda: Vec<T>) -> Result<Self> {
        if a.cols() != b.cols() || a.cols() != lambda.len() {
            return Err(Error::shape(format!(
                "block term with {} A columns, {} B columns and {} weights",
                a.cols(),
                b.cols(),
                lambda.len()
            )));
        }
        if c.is_empty() {
            return Err(Error::shape("empty mixing vector"));
        }
        Ok(Self { a, b, c, lambda })
    }

    /// `L`.
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// The common-feature slice `A diag(λ) Bᵀ`.
    pub fn slice(&self) -> Matrix<T> {
        self.a.scale_columns(&self.lambda).matmul(&self.b.transpose()).expect("consistent block term")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LL1Factors<T> {
    pub terms: Vec<BlockTerm<T>>,
}

impl<T: Scalar> LL1Factors<T> {
    pub fn new(terms: Vec<BlockTerm<T>>) -> Result<Self> {
        let f = Self { terms };
        f.shape()?;
        Ok(f)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.terms.iter().map(BlockTerm::rank).collect()
    }

    /// `(O, P, Q)`, checking that all terms agree.
    pub fn shape(&self) -> Result<(usize, usize, usize)> {
        let first = self.terms.first().ok_or_else(|| Error::invalid("an LL1 model needs at least one term"))?;
        let dims = (first.a.rows(), first.b.rows(), first.c.len());
        for t in &self.terms {
            if (t.a.rows(), t.b.rows(), t.c.len()) != dims || t.a.cols() != t.b.cols() || t.a.cols() != t.lambda.len() {
                return Err(Error::shape("block terms disagree in size"));
            }
        }
        Ok(dims)
    }

    /// `Q × K` matrix whose column `k` is `c_k`.
    pub fn mixing(&self) -> Matrix<T> {
        Matrix::from_columns(&self.terms.iter().map(|t| t.c.clone()).collect::<Vec<_>>()).expect("equal lengths")
    }
}

impl<T: Scalar> Reconstruct<T> for LL1Factors<T> {
    fn reconstruct(&self) -> Result<DenseTensor<T>> {
        self.shape()?;
        let parts: Vec<(Matrix<T>, &[T])> = self.terms.iter().map(|t| (t.slice(), &t.c[..])).collect();
        matrix_outer_sum(&parts)
    }
}

fn repeat_column<T: Scalar>(c: &[T], times: usize) -> Matrix<T> {
    Matrix::from_fn(c.len(), times, |i, _| c[i])
}

fn sign_fixed_nonnegative<T: Scalar>(v: &[T], rng: &mut Rng) -> Vec<T> {
    let dominant = v.iter().fold(T::zero(), |m, &x| if x.abs() > m.abs() { x } else { m });
    let flip = if dominant < T::zero() { -T::one() } else { T::one() };
    let clamped: Vec<T> = v.iter().map(|&x| (x * flip).max(T::zero())).collect();
    let n = norm2(&clamped);
    if n > T::zero() {
        clamped.into_iter().map(|x| x / n).collect()
    } else {
        random_unit_vector(v.len(), true, rng)
    }
}

fn initial_terms<T: Scalar>(
    t: &DenseTensor<T>,
    ranks: &[usize],
    cfg: &DecompConfig,
    rng: &mut Rng,
) -> Result<Vec<BlockTerm<T>>> {
    let (o, p, q) = check_order3(t)?;
    match cfg.init {
        Init::Random => Ok(ranks
            .iter()
            .map(|&l| {
                let mut a = normal_matrix(o, l, rng);
                let mut b = normal_matrix(p, l, rng);
                normalize_columns(&mut a, rng);
                normalize_columns(&mut b, rng);
                let c = random_unit_vector(q, true, rng);
                BlockTerm { a, b, c, lambda: vec![T::one(); l] }
            })
            .collect()),
        Init::HosvdBased => {
            let total: usize = ranks.iter().sum();
            let u0 = leading_left_vectors(&t.unfold(0)?, total, rng)?;
            let u1 = leading_left_vectors(&t.unfold(1)?, total, rng)?;
            let u2 = leading_left_vectors(&t.unfold(2)?, ranks.len(), rng)?;
            let mut offset = 0;
            let mut terms = Vec::with_capacity(ranks.len());
            for (k, &l) in ranks.iter().enumerate() {
                let idx: Vec<usize> = (offset..offset + l).collect();
                offset += l;
                let c = sign_fixed_nonnegative(u2.col(k), rng);
                terms.push(BlockTerm {
                    a: u0.select_columns(&idx),
                    b: u1.select_columns(&idx),
                    c,
                    lambda: vec![T::one(); l],
                });
            }
            Ok(terms)
        }
    }
}

/// Block-term decomposition with `c_k ≥ 0`, one term per entry of `ranks`.
pub fn ll1_nn<T: Scalar>(t: &DenseTensor<T>, ranks: &[usize], cfg: &DecompConfig) -> Result<Fitted<LL1Factors<T>, T>> {
    cfg.validate()?;
    let (o, p, q) = check_order3(t)?;
    if ranks.is_empty() {
        return Err(Error::invalid("at least one block term is required"));
    }
    if let Some(k) = ranks.iter().position(|&l| l == 0) {
        return Err(Error::invalid(format!("term {k} has rank 0; every L_k must be at least 1")));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }

    let mut rng = rng::stream(cfg.seed, "ll1-init");
    let mut trace = FitTrace::new(cfg.seed);
    let mut terms = initial_terms(t, ranks, cfg, &mut rng)?;
    // X_(2)ᵀ: column q is the vectorised frontal slice q
    let stacked = Matrix::from_col_major(o * p, q, t.data().to_vec())?;

    for sweep in 0..cfg.max_sweeps {
        for k in 0..terms.len() {
            let others: Vec<(Matrix<T>, &[T])> =
                terms.iter().enumerate().filter(|&(n, _)| n != k).map(|(_, tm)| (tm.slice(), &tm.c[..])).collect();
            let residual = if others.is_empty() { t.clone() } else { t.sub(&matrix_outer_sum(&others)?)? };

            let l = terms[k].rank();
            let ck = repeat_column(&terms[k].c, l);
            let ctc = ck.t_matmul(&ck)?;

            let b = &terms[k].b;
            let gram = ctc.hadamard(&b.t_matmul(b)?)?;
            let a_hat = residual.unfold(0)?.matmul(&ck.khatri_rao(b)?)?.matmul(&pinv(&gram, None)?)?;

            let gram = ctc.hadamard(&a_hat.t_matmul(&a_hat)?)?;
            let b_hat = residual.unfold(1)?.matmul(&ck.khatri_rao(&a_hat)?)?.matmul(&pinv(&gram, None)?)?;

            let slices: Vec<Vec<T>> = terms
                .iter()
                .enumerate()
                .map(|(n, tm)| if n == k { a_hat.matmul(&b_hat.transpose()) } else { Ok(tm.slice()) })
                .map(|m| m.map(Matrix::into_data))
                .collect::<Result<_>>()?;
            let regressor = Matrix::from_columns(&slices)?;
            let mixing = nnls_multi(&regressor, &stacked).map_err(|e| e.in_term(k))?;

            let mut a_hat = a_hat;
            let mut b_hat = b_hat;
            let (a_norms, dead_a) = normalize_columns(&mut a_hat, &mut rng);
            let (b_norms, dead_b) = normalize_columns(&mut b_hat, &mut rng);
            for column in dead_a {
                trace.diagnostics.push(Diagnostic::ZeroColumn { term: k, mode: 0, column, sweep });
            }
            for column in dead_b {
                trace.diagnostics.push(Diagnostic::ZeroColumn { term: k, mode: 1, column, sweep });
            }

            for (n, term) in terms.iter_mut().enumerate() {
                let raw = mixing.row(n);
                let c_norm = norm2(&raw);
                let alive = c_norm > T::zero();
                if alive {
                    term.c = raw.into_iter().map(|x| x / c_norm).collect();
                } else {
                    term.c = random_unit_vector(q, true, &mut rng);
                    trace.diagnostics.push(Diagnostic::ZeroColumn { term: n, mode: 2, column: 0, sweep });
                }
                if n == k {
                    term.a = a_hat.clone();
                    term.b = b_hat.clone();
                    term.lambda = a_norms.iter().zip(&b_norms).map(|(&x, &y)| x * y * c_norm).collect();
                } else {
                    term.lambda.iter_mut().for_each(|w| *w *= c_norm);
                }
            }
        }

        let model = LL1Factors { terms: terms.clone() };
        let fit = crate::decomp::fit_error(t, &model)?;
        if trace.push(fit, cfg.rel_tol) {
            trace.converged = true;
            break;
        }
    }

    for (k, term) in terms.iter().enumerate() {
        let count = term.c.iter().filter(|&&x| x == T::zero()).count();
        if count > 0 {
            trace.diagnostics.push(Diagnostic::ZeroMixingEntries { term: k, count });
        }
    }
    Ok(Fitted { model: LL1Factors { terms }, trace })
}

/// Best of `restarts` seeded runs of [`ll1_nn`] by final fit.
pub fn ll1_nn_best<T: Scalar>(
    t: &DenseTensor<T>,
    ranks: &[usize],
    cfg: &DecompConfig,
    restarts: usize,
) -> Result<Fitted<LL1Factors<T>, T>> {
    crate::decomp::best_of(cfg, restarts, |c| ll1_nn(t, ranks, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::fit_error;

    fn single_term(seed: u64, l: usize) -> (DenseTensor<f64>, BlockTerm<f64>) {
        let mut rng = rng::stream(seed, "ll1-unit");
        let term = BlockTerm {
            a: normal_matrix(5, l, &mut rng),
            b: normal_matrix(4, l, &mut rng),
            c: random_unit_vector(6, true, &mut rng),
            lambda: vec![1.0; l],
        };
        let t = LL1Factors { terms: vec![term.clone()] }.reconstruct().unwrap();
        (t, term)
    }

    #[test]
    fn single_term_is_recovered() {
        let (t, truth) = single_term(1, 2);
        let f = ll1_nn(&t, &[2], &DecompConfig::default()).unwrap();
        assert!(f.trace.final_fit() < 1e-6, "fit {}", f.trace.final_fit());
        let c = &f.model.terms[0].c;
        let cos: f64 = c.iter().zip(&truth.c).map(|(x, y)| x * y).sum();
        assert!(cos > 1.0 - 1e-8);
    }

    #[test]
    fn invariants_hold_each_run() {
        let (t, _) = single_term(2, 3);
        let noisy = t.map(|x| x + 0.05 * x.sin());
        for init in [Init::Random, Init::HosvdBased] {
            let cfg = DecompConfig { max_sweeps: 40, init, ..Default::default() };
            let f = ll1_nn(&noisy, &[2, 1], &cfg).unwrap();
            for w in f.trace.fit_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
            for term in &f.model.terms {
                assert!(term.c.iter().all(|&x| x >= 0.0));
                assert!((norm2(&term.c) - 1.0).abs() < 1e-10);
                for n in term.a.column_norms().into_iter().chain(term.b.column_norms()) {
                    assert!((n - 1.0).abs() < 1e-10);
                }
                assert!(term.lambda.iter().all(|&x| x >= 0.0));
            }
            assert_eq!(f.trace.final_fit(), fit_error(&noisy, &f.model).unwrap());
        }
    }

    #[test]
    fn argument_errors() {
        let t = DenseTensor::<f64>::zeros(&[2, 2, 2]).unwrap();
        let cfg = DecompConfig::default();
        assert!(ll1_nn(&t, &[], &cfg).is_err());
        assert!(ll1_nn(&t, &[1, 0], &cfg).is_err());
        assert!(ll1_nn(&DenseTensor::<f64>::zeros(&[2, 2]).unwrap(), &[1], &cfg).is_err());
    }

    #[test]
    fn zero_tensor_reports_absolute_error() {
        let t = DenseTensor::<f64>::zeros(&[2, 3, 2]).unwrap();
        let f = ll1_nn(&t, &[1], &DecompConfig { max_sweeps: 3, ..Default::default() }).unwrap();
        assert_eq!(f.trace.final_fit(), 0.0);
        assert!(f.model.terms[0].lambda.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn repeat_builds_tied_columns() {
        let m = repeat_column(&[1.0, 2.0], 3);
        assert_eq!(m.dims(), (2, 3));
        assert!(m.columns().all(|c| c == [1.0, 2.0]));
    }

    #[test]
    fn mismatched_terms_are_rejected() {
        let a = Matrix::<f64>::identity(2);
        assert!(BlockTerm::new(a.clone(), Matrix::identity(3), vec![1.0], vec![1.0, 1.0]).is_err());
        let t1 = BlockTerm::new(a.clone(), a.clone(), vec![1.0], vec![1.0, 1.0]).unwrap();
        let t2 = BlockTerm::new(a.clone(), a.clone(), vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(LL1Factors::new(vec![t1, t2]).is_err());
    }
}
