use crate::decomp::Reconstruct;
use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Matrix};

/// Tucker form `G ×_0 U_0 ×_1 U_1 ..` with orthonormal mode factors.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerFactors<T> {
    pub core: DenseTensor<T>,
    pub factors: Vec<Matrix<T>>,
}

impl<T: Scalar> TuckerFactors<T> {
    pub fn mlrank(&self) -> &[usize] {
        self.core.shape()
    }
}

impl<T: Scalar> Reconstruct<T> for TuckerFactors<T> {
    fn reconstruct(&self) -> Result<DenseTensor<T>> {
        if self.factors.len() != self.core.order() {
            return Err(Error::shape("one factor per core mode required"));
        }
        self.factors.iter().enumerate().try_fold(self.core.clone(), |acc, (n, f)| acc.mode_n_product(f, n))
    }
}

/// Truncated higher-order SVD: each factor holds the leading left singular
/// vectors of the corresponding unfolding, and the core is the projection
/// `t ×_0 U_0ᵀ ×_1 U_1ᵀ ..`. Full multilinear rank reproduces `t` exactly.
pub fn hosvd<T: Scalar>(t: &DenseTensor<T>, mlrank: &[usize]) -> Result<TuckerFactors<T>> {
    if mlrank.len() != t.order() {
        return Err(Error::invalid(format!(
            "multilinear rank has {} entries for an order-{} tensor",
            mlrank.len(),
            t.order()
        )));
    }
    for (n, (&r, &e)) in mlrank.iter().zip(t.shape()).enumerate() {
        if r == 0 || r > e {
            return Err(Error::invalid(format!("rank {r} for mode {n} must lie in 1..={e}")));
        }
    }
    let mut factors = Vec::with_capacity(t.order());
    for (n, &r) in mlrank.iter().enumerate() {
        let f = svd(&t.unfold(n)?)?;
        let idx: Vec<usize> = (0..r).collect();
        factors.push(f.u.select_columns(&idx));
    }
    let core = factors.iter().enumerate().try_fold(t.clone(), |acc, (n, u)| acc.mode_n_product(&u.transpose(), n))?;
    Ok(TuckerFactors { core, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::fit_error;
    use crate::linalg::{orthonormality_error, svd};
    use crate::tensor::outer_product;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::stream(seed, "hosvd-test");
        DenseTensor::from_fn(shape, |_| StandardNormal.sample(&mut rng)).unwrap()
    }

    #[test]
    fn full_rank_is_exact() {
        let t = random_tensor(&[3, 4, 5], 1);
        let h = hosvd(&t, &[3, 4, 5]).unwrap();
        assert!(fit_error(&t, &h).unwrap() < 1e-10);
        for f in &h.factors {
            assert!(orthonormality_error(f) < 1e-10);
        }
    }

    #[test]
    fn rank_one_tensor_needs_rank_one() {
        let t = outer_product(&[vec![1.0, -2.0, 0.5], vec![3.0, 1.0], vec![0.2, 0.4, 0.6, 0.8]]).unwrap();
        let h = hosvd(&t, &[1, 1, 1]).unwrap();
        assert!(fit_error(&t, &h).unwrap() < 1e-10);
    }

    #[test]
    fn truncation_error_within_discarded_energy() {
        let t = random_tensor(&[5, 6, 7], 2);
        let ranks = [2, 3, 4];
        let h = hosvd(&t, &ranks).unwrap();
        let err = t.sub(&h.reconstruct().unwrap()).unwrap().norm_frobenius();
        let mut bound = 0.0;
        for (n, &r) in ranks.iter().enumerate() {
            let s = svd(&t.unfold(n).unwrap()).unwrap().s;
            bound += s[r..].iter().map(|x| x * x).sum::<f64>();
        }
        assert!(err <= bound.sqrt() + 1e-12, "{err} > {}", bound.sqrt());
    }

    #[test]
    fn rejects_out_of_range_ranks() {
        let t = random_tensor(&[2, 3, 4], 3);
        assert!(hosvd(&t, &[0, 1, 1]).is_err());
        assert!(hosvd(&t, &[3, 1, 1]).is_err());
        assert!(hosvd(&t, &[1, 1]).is_err());
    }
}
