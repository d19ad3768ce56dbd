use crate::decomp::{
    check_order3, leading_left_vectors, normal_matrix, normalize_columns, DecompConfig, Diagnostic, FitTrace, Fitted,
    Init, Reconstruct,
};
use crate::error::{Error, Result};
use crate::linalg::pinv;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Matrix};

/// Kruskal form `⟦λ; A_0, A_1, ..⟧`: unit-norm factor columns, non-negative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct KruskalFactors<T> {
    pub factors: Vec<Matrix<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> KruskalFactors<T> {
    pub fn new(factors: Vec<Matrix<T>>, weights: Vec<T>) -> Result<Self> {
        let k = Self { factors, weights };
        k.check()?;
        Ok(k)
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    fn check(&self) -> Result<()> {
        if self.factors.len() < 2 {
            return Err(Error::invalid("a Kruskal model needs at least two factor matrices"));
        }
        if self.factors.iter().any(|f| f.cols() != self.weights.len()) {
            return Err(Error::shape("factor column counts must equal the number of weights"));
        }
        Ok(())
    }
}

impl<T: Scalar> Reconstruct<T> for KruskalFactors<T> {
    fn reconstruct(&self) -> Result<DenseTensor<T>> {
        self.check()?;
        let shape = self.shape();
        // X_(0) = A_0 · diag(λ) · (A_{N-1} ⊙ .. ⊙ A_1)ᵀ
        let mut kr = self.factors[1].clone();
        for f in &self.factors[2..] {
            kr = f.khatri_rao(&kr)?;
        }
        let unfolded = self.factors[0].scale_columns(&self.weights).matmul(&kr.transpose())?;
        DenseTensor::fold(&unfolded, 0, &shape)
    }
}

/// CP decomposition of a third-order tensor by alternating least squares.
pub fn cpd_als<T: Scalar>(t: &DenseTensor<T>, rank: usize, cfg: &DecompConfig) -> Result<Fitted<KruskalFactors<T>, T>> {
    cfg.validate()?;
    let dims = check_order3(t)?;
    if rank == 0 {
        return Err(Error::invalid("CP rank must be at least 1"));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    let extents = [dims.0, dims.1, dims.2];
    let unfoldings = [t.unfold(0)?, t.unfold(1)?, t.unfold(2)?];
    let mut rng = rng::stream(cfg.seed, "cpd-init");
    let mut trace = FitTrace::new(cfg.seed);
    for (mode, &extent) in extents.iter().enumerate() {
        if rank > extent {
            trace.diagnostics.push(Diagnostic::RankExceedsExtent { mode, rank, extent });
        }
    }

    let mut factors: Vec<Matrix<T>> = match cfg.init {
        Init::Random => extents.iter().map(|&e| normal_matrix(e, rank, &mut rng)).collect(),
        Init::HosvdBased => {
            unfoldings.iter().map(|u| leading_left_vectors(u, rank, &mut rng)).collect::<Result<_>>()?
        }
    };
    let mut weights = vec![T::one(); rank];
    for f in &mut factors {
        normalize_columns(f, &mut rng);
    }

    for sweep in 0..cfg.max_sweeps {
        for mode in 0..3 {
            let (p, q) = match mode {
                0 => (2, 1),
                1 => (2, 0),
                _ => (1, 0),
            };
            let kr = factors[p].khatri_rao(&factors[q])?;
            let gram = factors[p].t_matmul(&factors[p])?.hadamard(&factors[q].t_matmul(&factors[q])?)?;
            let mut updated = unfoldings[mode].matmul(&kr)?.matmul(&pinv(&gram, None)?)?;
            let (norms, dead) = normalize_columns(&mut updated, &mut rng);
            for column in dead {
                trace.diagnostics.push(Diagnostic::ZeroColumn { term: column, mode, column, sweep });
            }
            factors[mode] = updated;
            weights = norms;
        }
        let model = KruskalFactors { factors: factors.clone(), weights: weights.clone() };
        let fit = crate::decomp::fit_error(t, &model)?;
        if trace.push(fit, cfg.rel_tol) {
            trace.converged = true;
            break;
        }
    }

    // strongest component first
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).expect("finite weights").then(a.cmp(&b)));
    let model = KruskalFactors {
        factors: factors.iter().map(|f| f.select_columns(&order)).collect(),
        weights: order.iter().map(|&j| weights[j]).collect(),
    };
    Ok(Fitted { model, trace })
}

/// Best of `restarts` independent runs by final fit; ties go to the earliest.
pub fn cpd_als_best<T: Scalar>(
    t: &DenseTensor<T>,
    rank: usize,
    cfg: &DecompConfig,
    restarts: usize,
) -> Result<Fitted<KruskalFactors<T>, T>> {
    crate::decomp::best_of(cfg, restarts, |c| cpd_als(t, rank, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::matching::factor_match_score;
    use crate::decomp::{fit_error, random_unit_vector};
    use crate::tensor::outer_product;

    #[test]
    fn exact_rank_one_recovery() {
        let mut rng = rng::stream(3, "test");
        let vs: Vec<Vec<f64>> = [4, 5, 6].iter().map(|&n| random_unit_vector(n, false, &mut rng)).collect();
        let t = outer_product(&vs).unwrap().scale(2.5);
        let f = cpd_als(&t, 1, &DecompConfig::default()).unwrap();
        assert!(f.trace.final_fit() < 1e-8);
        assert!((f.model.weights[0] - 2.5).abs() < 1e-8);
        for (m, v) in f.model.factors.iter().zip(&vs) {
            let cos: f64 = m.col(0).iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(cos.abs() > 1.0 - 1e-6);
        }
    }

    #[test]
    fn recovers_random_rank_two() {
        let mut rng = rng::stream(5, "test");
        let truth: Vec<Matrix<f64>> = [6, 7, 8].iter().map(|&n| normal_matrix(n, 2, &mut rng)).collect();
        let model = KruskalFactors::new(truth.clone(), vec![1.0, 1.0]).unwrap();
        let t = model.reconstruct().unwrap();
        let f = cpd_als_best(&t, 2, &DecompConfig::default(), 5).unwrap();
        assert!(f.trace.final_fit() < 1e-6, "fit {}", f.trace.final_fit());
        for (est, tr) in f.model.factors.iter().zip(&truth) {
            assert!(factor_match_score(est, tr).unwrap() > 0.999);
        }
        assert!(fit_error(&t, &f.model).unwrap() < 1e-6);
    }

    #[test]
    fn monotone_descent_and_unit_columns() {
        let mut rng = rng::stream(8, "test");
        let t = DenseTensor::new(vec![4, 5, 3], (0..60).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect()).unwrap();
        let f = cpd_als(&t, 3, &DecompConfig { max_sweeps: 60, ..Default::default() }).unwrap();
        for w in f.trace.fit_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
        for m in &f.model.factors {
            for n in m.column_norms() {
                assert!((n - 1.0).abs() < 1e-10);
            }
        }
        assert!(f.model.weights.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        let t = DenseTensor::<f64>::zeros(&[2, 2]).unwrap();
        assert!(cpd_als(&t, 1, &DecompConfig::default()).is_err());
        let t = DenseTensor::<f64>::zeros(&[2, 2, 2]).unwrap();
        assert!(cpd_als(&t, 0, &DecompConfig::default()).is_err());
    }

    #[test]
    fn oversized_rank_is_flagged_not_rejected() {
        let t = DenseTensor::from_fn(&[2, 3, 3], |i| (i[0] + 2 * i[1] + i[2] * i[2]) as f64).unwrap();
        let f = cpd_als(&t, 3, &DecompConfig { max_sweeps: 5, ..Default::default() }).unwrap();
        assert!(f.trace.diagnostics.contains(&Diagnostic::RankExceedsExtent { mode: 0, rank: 3, extent: 2 }));
    }

    #[test]
    fn hosvd_initialisation_runs() {
        let vs = [vec![1.0, 2.0, 3.0], vec![1.0, -1.0], vec![0.5, 0.5, 2.0]];
        let t = outer_product(&vs).unwrap();
        let cfg = DecompConfig { init: Init::HosvdBased, ..Default::default() };
        assert!(cpd_als(&t, 1, &cfg).unwrap().trace.final_fit() < 1e-10);
    }
}
