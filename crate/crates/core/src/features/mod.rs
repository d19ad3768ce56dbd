//! Splitting an ensemble into common and individual features.
//!
//! A [`CommonFeatureBank`] holds `K` common slices `Y_k = A_k diag(λ_k) B_kᵀ`
//! and the non-negative mixing matrix `C` (`Q × K`). Observation `n` is split
//! as
//!
//! ```text
//! common[n]     = Σ_{k ∈ K_n} C(n, k) · Y_k
//! individual[n] = slice_n − common[n]
//! ```
//!
//! where `K_n` is chosen by a [`SubsetRule`] on row `n` of `C`.

mod baselines;

pub use baselines::{common_basis_qr, stacked_pca, CommonBasis, CommonBasisConfig, StackedPca};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomp::LL1Factors;
use crate::dtf1;
use crate::error::{Error, Result};
use crate::linalg::nnls_multi;
use crate::scalar::Scalar;
use crate::tensor::{matrix_outer_sum, DenseTensor, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct CommonFeatureBank<T> {
    pub slices: Vec<Matrix<T>>,
    /// `Q × K`, non-negative.
    pub mixing: Matrix<T>,
}

impl<T: Scalar> CommonFeatureBank<T> {
    pub fn new(slices: Vec<Matrix<T>>, mixing: Matrix<T>) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::invalid("a feature bank needs at least one slice"))?;
        if slices.iter().any(|s| s.dims() != first.dims()) {
            return Err(Error::shape("bank slices differ in size"));
        }
        if mixing.cols() != slices.len() {
            return Err(Error::shape(format!("{} slices but {} mixing columns", slices.len(), mixing.cols())));
        }
        if mixing.data().iter().any(|&x| x.is_nan() || x < T::zero()) {
            return Err(Error::invalid("mixing weights must be non-negative"));
        }
        Ok(Self { slices, mixing })
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// `(O, P)` of every slice.
    pub fn slice_dims(&self) -> (usize, usize) {
        self.slices[0].dims()
    }

    /// `Σ_k Y_k ∘ C(:, k)`.
    pub fn reconstruct(&self) -> Result<DenseTensor<T>> {
        let cols: Vec<Vec<T>> = self.mixing.columns().map(<[T]>::to_vec).collect();
        let parts: Vec<(Matrix<T>, &[T])> = self.slices.iter().cloned().zip(cols.iter().map(|c| &c[..])).collect();
        matrix_outer_sum(&parts)
    }

    /// Concatenate banks learned on disjoint groups of observations. Slices
    /// are appended in order and the mixing matrices placed block-diagonally,
    /// so each observation keeps only the weights of its own bank.
    pub fn merge(banks: &[CommonFeatureBank<T>]) -> Result<Self> {
        let rows: usize = banks.iter().map(|b| b.mixing.rows()).sum();
        let cols: usize = banks.iter().map(|b| b.len()).sum();
        if banks.is_empty() {
            return Err(Error::invalid("nothing to merge"));
        }
        let mut mixing = Matrix::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        let mut slices = Vec::with_capacity(cols);
        for b in banks {
            for j in 0..b.len() {
                for i in 0..b.mixing.rows() {
                    mixing[(r0 + i, c0 + j)] = b.mixing[(i, j)];
                }
            }
            r0 += b.mixing.rows();
            c0 += b.len();
            slices.extend(b.slices.iter().cloned());
        }
        Self::new(slices, mixing)
    }

    /// Non-negative weights of unseen observations against the bank slices,
    /// returned as a `count × K` matrix in the layout of `mixing`.
    pub fn estimate_mixing(&self, images: &[Matrix<T>]) -> Result<Matrix<T>> {
        let (o, p) = self.slice_dims();
        if images.is_empty() {
            return Err(Error::invalid("no observations to project"));
        }
        if let Some(bad) = images.iter().find(|m| m.dims() != (o, p)) {
            return Err(Error::shape(format!("observation is {:?}, bank slices are {o}x{p}", bad.dims())));
        }
        let design = vectorized(&self.slices)?;
        let rhs = vectorized(images)?;
        Ok(nnls_multi(&design, &rhs)?.transpose())
    }

    /// Split unseen observations: estimate their weights by NNLS, then apply
    /// `rule` exactly as for the training ensemble.
    pub fn project(&self, images: &[Matrix<T>], rule: &SubsetRule) -> Result<FeatureSplit<T>> {
        let weights = self.estimate_mixing(images)?;
        split_slices(images, &self.slices, &weights, rule)
    }
}

/// Stack matrices as the columns of an `(rows·cols) × count` matrix.
fn vectorized<T: Scalar>(ms: &[Matrix<T>]) -> Result<Matrix<T>> {
    Matrix::from_columns(&ms.iter().map(|m| m.data().to_vec()).collect::<Vec<_>>())
}

/// Bank slices `A_k diag(λ_k) B_kᵀ` with the model's mixing matrix.
pub fn build_feature_bank<T: Scalar>(f: &LL1Factors<T>) -> Result<CommonFeatureBank<T>> {
    f.shape()?;
    CommonFeatureBank::new(f.terms.iter().map(|t| t.slice()).collect(), f.mixing())
}

/// Which common slices count towards observation `n`:
/// `K_n = {k : C(n, k) > τ · max_j C(n, j)}`, each weighted by `C(n, k)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetRule {
    pub tau: f64,
}

impl SubsetRule {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be a finite non-negative number, got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn select<T: Scalar>(&self, row: &[T]) -> Vec<usize> {
        let max = row.iter().copied().fold(T::zero(), T::max);
        let cut = T::of(self.tau) * max;
        (0..row.len()).filter(|&k| row[k] > cut).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSplit<T> {
    pub common: Vec<Matrix<T>>,
    pub individual: Vec<Matrix<T>>,
    /// `K_n` for every observation.
    pub selected: Vec<Vec<usize>>,
    /// Mixing weights the split was computed from, `Q × K`.
    pub weights: Matrix<T>,
}

impl<T: Scalar> FeatureSplit<T> {
    pub fn len(&self) -> usize {
        self.common.len()
    }

    pub fn is_empty(&self) -> bool {
        self.common.is_empty()
    }

    pub fn common_tensor(&self) -> Result<DenseTensor<T>> {
        DenseTensor::from_frontal_slices(&self.common)
    }

    pub fn individual_tensor(&self) -> Result<DenseTensor<T>> {
        DenseTensor::from_frontal_slices(&self.individual)
    }
}

pub fn split_features<T: Scalar>(
    t: &DenseTensor<T>,
    bank: &CommonFeatureBank<T>,
    rule: &SubsetRule,
) -> Result<FeatureSplit<T>> {
    let (o, p, q) = crate::decomp::check_order3(t)?;
    if (o, p) != bank.slice_dims() {
        return Err(Error::shape(format!(
            "frontal slices are {o}x{p}, bank slices are {}x{}",
            bank.slice_dims().0,
            bank.slice_dims().1
        )));
    }
    if q != bank.mixing.rows() {
        return Err(Error::shape(format!("{q} observations but {} mixing rows", bank.mixing.rows())));
    }
    split_slices(&t.frontal_slices()?, &bank.slices, &bank.mixing, rule)
}

fn split_slices<T: Scalar>(
    images: &[Matrix<T>],
    slices: &[Matrix<T>],
    weights: &Matrix<T>,
    rule: &SubsetRule,
) -> Result<FeatureSplit<T>> {
    let mut common = Vec::with_capacity(images.len());
    let mut individual = Vec::with_capacity(images.len());
    let mut selected = Vec::with_capacity(images.len());
    for (n, x) in images.iter().enumerate() {
        let row = weights.row(n);
        let ks = rule.select(&row);
        let mut c = Matrix::zeros(x.rows(), x.cols());
        for &k in &ks {
            c = c.add(&slices[k].scale(row[k]))?;
        }
        let (c, i) = exact_split(x, c);
        common.push(c);
        individual.push(i);
        selected.push(ks);
    }
    Ok(FeatureSplit { common, individual, selected, weights: weights.clone() })
}

/// Return `(c', x − c')` with `c'` within an ulp of `c`, nudged so that
/// `c' + (x − c')` rounds back to `x`.
///
/// This always succeeds when `c` lies within a factor of two of `x` (the
/// subtraction is then exact). When the common value exceeds the observation
/// by more than about 3× (or has the opposite sign) no pair of floats near
/// `(c, x − c)` sums to `x` exactly; such elements keep `(c, fl(x − c))`, whose
/// sum is off by at most one rounding.
fn exact_split<T: Scalar>(x: &Matrix<T>, mut c: Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let mut ind = x.sub(&c).expect("same dims");
    for ((&s, cv), iv) in x.data().iter().zip(c.data_mut()).zip(ind.data_mut()) {
        if *cv + *iv != s {
            let nudged = s - *iv;
            if nudged + *iv == s {
                *cv = nudged;
            }
        }
    }
    (c, ind)
}

/// What [`save_split`] writes next to the two stacks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub shape: Vec<usize>,
    pub subset_rule: SubsetRule,
    pub selected: Vec<Vec<usize>>,
    /// Row `n` holds the mixing weights of observation `n`.
    pub weights: Vec<Vec<f64>>,
}

/// Write `common.dtf1`, `individual.dtf1` and `manifest.json` into `dir`.
pub fn save_split<T: Scalar>(
    dir: impl AsRef<Path>,
    split: &FeatureSplit<T>,
    rule: &SubsetRule,
) -> Result<SplitManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let common = split.common_tensor()?;
    dtf1::save(&common, dir.join("common.dtf1"))?;
    dtf1::save(&split.individual_tensor()?, dir.join("individual.dtf1"))?;
    let manifest = SplitManifest {
        shape: common.shape().to_vec(),
        subset_rule: *rule,
        selected: split.selected.clone(),
        weights: (0..split.weights.rows()).map(|n| split.weights.row(n).iter().map(|x| x.as_f64()).collect()).collect(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{ll1_nn, BlockTerm, DecompConfig, Reconstruct};
    use crate::tensor::outer_product;

    fn bank_of(terms: Vec<BlockTerm<f64>>) -> CommonFeatureBank<f64> {
        build_feature_bank(&LL1Factors::new(terms).unwrap()).unwrap()
    }

    #[test]
    fn single_rank_one_slice() {
        let a = Matrix::from_columns(&[vec![0.6, 0.8]]).unwrap();
        let b = Matrix::from_columns(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let bank = bank_of(vec![BlockTerm::new(a.clone(), b.clone(), vec![1.0], vec![1.0]).unwrap()]);
        assert_eq!(bank.slices[0], a.matmul(&b.transpose()).unwrap());
    }

    #[test]
    fn bank_reconstructs_model() {
        let t = DenseTensor::from_fn(&[4, 3, 5], |i| ((i[0] + 2 * i[1] + 3 * i[2]) % 5) as f64 + 0.5).unwrap();
        let f = ll1_nn(&t, &[2, 1], &DecompConfig { max_sweeps: 20, ..Default::default() }).unwrap().model;
        let bank = build_feature_bank(&f).unwrap();
        let diff = bank.reconstruct().unwrap().sub(&f.reconstruct().unwrap()).unwrap().norm_frobenius();
        assert!(diff < 1e-10);
    }

    #[test]
    fn rank_one_ensemble_has_no_individual_part() {
        let a = [0.3, 0.1, 0.7];
        let b = [0.5, 0.2];
        let t = outer_product(&[&a[..], &b[..], &[1.0, 4.0, 8.0][..]]).unwrap();
        let f = ll1_nn(&t, &[1], &DecompConfig::default()).unwrap().model;
        let s = split_features(&t, &build_feature_bank(&f).unwrap(), &SubsetRule::default()).unwrap();
        for n in 0..3 {
            let x = t.frontal_slice(n).unwrap();
            assert!(s.individual[n].norm_frobenius() <= 1e-6 * x.norm_frobenius());
        }
        let ratio = s.common[1].sub(&s.common[0].scale(4.0)).unwrap().norm_frobenius();
        assert!(ratio < 1e-10 * s.common[1].norm_frobenius());
    }

    #[test]
    fn additivity_holds_to_the_last_bit() {
        let t = DenseTensor::from_fn(&[5, 4, 6], |i| ((i[0] * 13 + i[1] * 7 + i[2] * 3) % 11) as f64 / 7.0).unwrap();
        let f = ll1_nn(&t, &[2, 2], &DecompConfig { max_sweeps: 30, ..Default::default() }).unwrap().model;
        let bank = build_feature_bank(&f).unwrap();
        for tau in [0.0, 0.3, 0.9, 1.1] {
            let s = split_features(&t, &bank, &SubsetRule::new(tau).unwrap()).unwrap();
            for n in 0..6 {
                let x = t.frontal_slice(n).unwrap();
                let sum = s.common[n].add(&s.individual[n]).unwrap();
                for ((&x, &y), &c) in x.data().iter().zip(sum.data()).zip(s.common[n].data()) {
                    if c >= x / 2.0 && c <= 2.0 * x {
                        assert_eq!(x, y);
                    } else {
                        assert!((x - y).abs() <= f64::EPSILON * c.abs());
                    }
                }
            }
        }
    }

    #[test]
    fn exact_split_near_the_data() {
        let x = Matrix::from_col_major(1, 4, vec![1.0, 0.1, -3.0, 0.7]).unwrap();
        let c = Matrix::from_col_major(1, 4, vec![0.6, 0.15000000000000002, 1e-300, 1.3]).unwrap();
        let (c2, i) = exact_split(&x, c.clone());
        assert_eq!(c2.add(&i).unwrap(), x);
        assert!(c2.sub(&c).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn exact_split_never_distorts() {
        let x = Matrix::from_col_major(1, 2, vec![1.0, 0.1]).unwrap();
        let c = Matrix::from_col_major(1, 2, vec![1e20, 0.35]).unwrap();
        let (c2, i) = exact_split(&x, c.clone());
        assert_eq!(c2, c);
        assert!(c2.add(&i).unwrap().sub(&x).unwrap().max_abs() <= 2.0 * f64::EPSILON * 1e20);
    }

    #[test]
    fn tau_only_shrinks_subsets() {
        let rule = |t| SubsetRule::new(t).unwrap();
        let row = [0.5, 0.0, 1.0, 0.25];
        assert_eq!(rule(0.0).select(&row), vec![0, 2, 3]);
        assert_eq!(rule(0.3).select(&row), vec![0, 2]);
        assert_eq!(rule(1.0).select(&row), Vec::<usize>::new());
        assert_eq!(rule(0.5).select(&[0.0f64; 3]), Vec::<usize>::new());
        assert!(SubsetRule::new(-1.0).is_err());
        assert!(SubsetRule::new(f64::NAN).is_err());
    }

    #[test]
    fn projection_recovers_weights() {
        let y0 = Matrix::from_fn(3, 2, |i, j| (i + j) as f64 + 1.0);
        let y1 = Matrix::from_fn(3, 2, |i, j| if i == j { 2.0 } else { 0.0 });
        let bank = CommonFeatureBank::new(vec![y0.clone(), y1.clone()], Matrix::identity(2)).unwrap();
        let x = y0.scale(0.5).add(&y1.scale(3.0)).unwrap();
        let w = bank.estimate_mixing(std::slice::from_ref(&x)).unwrap();
        assert!((w[(0, 0)] - 0.5).abs() < 1e-10 && (w[(0, 1)] - 3.0).abs() < 1e-10);
        let s = bank.project(&[x], &SubsetRule::default()).unwrap();
        assert!(s.individual[0].norm_frobenius() < 1e-10);
        assert!(bank.estimate_mixing(&[Matrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn merge_is_block_diagonal() {
        let y = |v: f64| Matrix::from_fn(2, 2, |_, _| v);
        let b1 = CommonFeatureBank::new(vec![y(1.0)], Matrix::from_col_major(2, 1, vec![1.0, 2.0]).unwrap()).unwrap();
        let b2 = CommonFeatureBank::new(vec![y(2.0), y(3.0)], Matrix::from_rows(&[vec![1.0, 4.0]]).unwrap()).unwrap();
        let m = CommonFeatureBank::merge(&[b1, b2]).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.mixing.row(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(m.mixing.row(2), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn bank_validation() {
        assert!(CommonFeatureBank::<f64>::new(vec![], Matrix::identity(1)).is_err());
        assert!(CommonFeatureBank::new(vec![Matrix::identity(2)], Matrix::from_diag(&[-1.0])).is_err());
        assert!(CommonFeatureBank::new(vec![Matrix::identity(2)], Matrix::<f64>::identity(2)).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let bank = CommonFeatureBank::new(vec![Matrix::identity(2)], Matrix::from_diag(&[1.0])).unwrap();
        let t = DenseTensor::<f64>::zeros(&[3, 2, 1]).unwrap();
        assert!(split_features(&t, &bank, &SubsetRule::default()).is_err());
        let t = DenseTensor::<f64>::zeros(&[2, 2, 2]).unwrap();
        assert!(split_features(&t, &bank, &SubsetRule::default()).is_err());
    }

    #[test]
    fn export_writes_stacks() {
        let t = outer_product(&[vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let f = ll1_nn(&t, &[1], &DecompConfig::default()).unwrap().model;
        let rule = SubsetRule::default();
        let s = split_features(&t, &build_feature_bank(&f).unwrap(), &rule).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let man = save_split(dir.path(), &s, &rule).unwrap();
        assert_eq!(man.shape, vec![2, 2, 2]);
        let c: DenseTensor<f64> = dtf1::load(dir.path().join("common.dtf1")).unwrap();
        let i: DenseTensor<f64> = dtf1::load(dir.path().join("individual.dtf1")).unwrap();
        assert_eq!(c.add(&i).unwrap(), t);
    }
}
