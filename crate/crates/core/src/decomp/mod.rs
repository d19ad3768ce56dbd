//! Tensor decompositions: CP by alternating least squares, truncated HOSVD,
//! and the rank-(L, L, 1) block-term decomposition with a non-negative
//! third-mode factor.

pub mod bundle;
mod cpd;
mod hosvd;
mod ll1;
pub mod matching;

pub use cpd::{cpd_als, cpd_als_best, KruskalFactors};
pub use hosvd::{hosvd, TuckerFactors};
pub use ll1::{ll1_nn, ll1_nn_best, BlockTerm, LL1Factors};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{norm2, DenseTensor, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Standard normal spatial factors, uniform(0, 1) non-negative mode.
    #[default]
    Random,
    /// Leading singular vectors of the unfoldings.
    HosvdBased,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecompConfig {
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init: Init,
}

impl Default for DecompConfig {
    fn default() -> Self {
        Self { max_sweeps: 500, rel_tol: 1e-8, seed: 0, init: Init::Random }
    }
}

impl DecompConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

/// Conditions worth surfacing that do not abort a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostic {
    /// A factor column collapsed to zero and was re-seeded with weight 0.
    ZeroColumn { term: usize, mode: usize, column: usize, sweep: usize },
    /// The requested rank exceeds the extent of a mode.
    RankExceedsExtent { mode: usize, rank: usize, extent: usize },
    /// Exact zeros in a returned non-negative mixing vector.
    ZeroMixingEntries { term: usize, count: usize },
}

/// Per-run convergence record.
#[derive(Clone, Debug, PartialEq)]
pub struct FitTrace<T> {
    /// Relative reconstruction error after each sweep.
    pub fit_history: Vec<T>,
    pub converged: bool,
    pub seed: u64,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T: Scalar> FitTrace<T> {
    pub fn new(seed: u64) -> Self {
        Self { fit_history: Vec::new(), converged: false, seed, diagnostics: Vec::new() }
    }

    pub fn sweeps(&self) -> usize {
        self.fit_history.len()
    }

    pub fn final_fit(&self) -> T {
        self.fit_history.last().copied().unwrap_or_else(T::one)
    }

    /// Record a sweep and report whether the stopping rule fired.
    pub(crate) fn push(&mut self, fit: T, rel_tol: f64) -> bool {
        let prev = self.fit_history.last().copied();
        self.fit_history.push(fit);
        if fit <= exact_fit_floor::<T>() {
            return true;
        }
        match prev {
            Some(p) => (p - fit).abs() / p.max(T::epsilon()) < T::of(rel_tol),
            None => false,
        }
    }
}

/// Below this relative error the model reproduces the data to rounding.
fn exact_fit_floor<T: Scalar>() -> T {
    T::epsilon() * T::of(64.0)
}

/// A fitted model together with its convergence record.
#[derive(Clone, Debug)]
pub struct Fitted<M, T> {
    pub model: M,
    pub trace: FitTrace<T>,
}

/// Models that can be expanded back into a dense tensor.
pub trait Reconstruct<T: Scalar> {
    fn reconstruct(&self) -> Result<DenseTensor<T>>;
}

pub fn reconstruct<T: Scalar, M: Reconstruct<T>>(model: &M) -> Result<DenseTensor<T>> {
    model.reconstruct()
}

/// `‖t − reconstruct(model)‖_F / ‖t‖_F`, or the absolute error when `t` is zero.
pub fn fit_error<T: Scalar, M: Reconstruct<T>>(t: &DenseTensor<T>, model: &M) -> Result<T> {
    relative_error(t, &model.reconstruct()?)
}

pub fn relative_error<T: Scalar>(t: &DenseTensor<T>, approx: &DenseTensor<T>) -> Result<T> {
    let err = t.sub(approx)?.norm_frobenius();
    let base = t.norm_frobenius();
    Ok(if base > T::zero() { err / base } else { err })
}

pub(crate) fn check_order3<T: Scalar>(t: &DenseTensor<T>) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [o, p, q] => Ok((o, p, q)),
        _ => Err(Error::invalid(format!("expected an order-3 tensor, got shape {:?}", t.shape()))),
    }
}

pub(crate) fn normal_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| T::of(StandardNormal.sample(rng)))
}

pub(crate) fn random_unit_vector<T: Scalar>(len: usize, nonnegative: bool, rng: &mut Rng) -> Vec<T> {
    loop {
        let v: Vec<T> = (0..len)
            .map(|_| if nonnegative { T::of(rng.gen::<f64>()) } else { T::of(StandardNormal.sample(rng)) })
            .collect();
        let n = norm2(&v);
        if n > T::zero() {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Normalise every column in place, returning the norms. Columns with zero
/// norm are replaced by fresh random unit columns and report a zero norm.
pub(crate) fn normalize_columns<T: Scalar>(m: &mut Matrix<T>, rng: &mut Rng) -> (Vec<T>, Vec<usize>) {
    let mut norms = Vec::with_capacity(m.cols());
    let mut dead = Vec::new();
    for j in 0..m.cols() {
        let n = norm2(m.col(j));
        if n > T::zero() && n.is_finite() {
            m.col_mut(j).iter_mut().for_each(|x| *x /= n);
            norms.push(n);
        } else {
            let fresh = random_unit_vector::<T>(m.rows(), false, rng);
            m.col_mut(j).copy_from_slice(&fresh);
            norms.push(T::zero());
            dead.push(j);
        }
    }
    (norms, dead)
}

/// Leading left singular vectors of `x`, padded with random unit columns
/// when `count` exceeds the available rank.
pub(crate) fn leading_left_vectors<T: Scalar>(x: &Matrix<T>, count: usize, rng: &mut Rng) -> Result<Matrix<T>> {
    let f = crate::linalg::svd(x)?;
    let avail = f.u.cols();
    let cols: Vec<Vec<T>> = (0..count)
        .map(|j| if j < avail { f.u.col(j).to_vec() } else { random_unit_vector(x.rows(), false, rng) })
        .collect();
    Matrix::from_columns(&cols)
}

/// Run `restarts` seeded copies of a decomposition and keep the lowest final
/// fit. Restart 0 uses `cfg.seed` itself; ties go to the earliest restart.
pub(crate) fn best_of<M, T: Scalar>(
    cfg: &DecompConfig,
    restarts: usize,
    run: impl Fn(&DecompConfig) -> Result<Fitted<M, T>>,
) -> Result<Fitted<M, T>> {
    let mut best: Option<Fitted<M, T>> = None;
    for r in 0..restarts.max(1) {
        let seed = if r == 0 { cfg.seed } else { crate::rng::derive_seed(cfg.seed, "restart", r as u64) };
        let fitted = run(&cfg.clone().with_seed(seed))?;
        if best.as_ref().is_none_or(|b| fitted.trace.final_fit() < b.trace.final_fit()) {
            best = Some(fitted);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(DecompConfig::default().validate().is_ok());
        let bad = DecompConfig { rel_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = DecompConfig { max_sweeps: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = DecompConfig { max_sweeps: 17, rel_tol: 1e-6, seed: 99, init: Init::HosvdBased };
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"hosvd-based\""));
        assert_eq!(serde_json::from_str::<DecompConfig>(&s).unwrap(), cfg);
    }

    #[test]
    fn stopping_rule() {
        let mut t = FitTrace::<f64>::new(0);
        assert!(!t.push(0.5, 1e-3));
        assert!(!t.push(0.4, 1e-3));
        assert!(t.push(0.39999, 1e-3));
        let mut t = FitTrace::<f64>::new(0);
        assert!(t.push(1e-16, 1e-3));
    }

    #[test]
    fn zero_tensor_error_is_absolute() {
        let z = DenseTensor::<f64>::zeros(&[2, 2]).unwrap();
        let x = DenseTensor::new(vec![2, 2], vec![3.0, 0.0, 4.0, 0.0]).unwrap();
        assert_eq!(relative_error(&z, &x).unwrap(), 5.0);
        assert_eq!(relative_error(&x, &z).unwrap(), 1.0);
    }
}
