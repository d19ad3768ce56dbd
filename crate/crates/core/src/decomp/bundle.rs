//! Factor bundles: a directory of `DTF1` files plus `manifest.json`.
//!
//! | model | files |
//! |-------|-------|
//! | cpd   | `factor{n}.dtf1` |
//! | hosvd | `core.dtf1`, `factor{n}.dtf1` |
//! | ll1   | `term{k}_a.dtf1`, `term{k}_b.dtf1`, `term{k}_c.dtf1` |
//!
//! Weights (`λ`) live in the manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomp::{BlockTerm, Diagnostic, FitTrace, KruskalFactors, LL1Factors, Reconstruct, TuckerFactors};
use crate::dtf1;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cpd,
    Hosvd,
    Ll1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    /// Number of components (CPD), block terms (LL1), or 1 for a Tucker core.
    #[serde(rename = "K")]
    pub k: usize,
    /// CP rank, per-term `L_k`, or the multilinear rank.
    pub ranks: Vec<usize>,
    pub lambda: Vec<Vec<f64>>,
    pub fit_history: Vec<f64>,
    pub seed: u64,
    pub sweeps: usize,
    pub converged: bool,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model<T> {
    Cpd(KruskalFactors<T>),
    Hosvd(TuckerFactors<T>),
    Ll1(LL1Factors<T>),
}

impl<T: Scalar> Reconstruct<T> for Model<T> {
    fn reconstruct(&self) -> Result<DenseTensor<T>> {
        match self {
            Model::Cpd(m) => m.reconstruct(),
            Model::Hosvd(m) => m.reconstruct(),
            Model::Ll1(m) => m.reconstruct(),
        }
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Write `model` into `dir` (created if missing) and return the manifest.
pub fn save<T: Scalar>(dir: impl AsRef<Path>, model: &Model<T>, trace: &FitTrace<T>) -> Result<BundleManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (kind, k, ranks, lambda, shape) = match model {
        Model::Cpd(m) => {
            for (n, f) in m.factors.iter().enumerate() {
                dtf1::save_matrix(f, dir.join(format!("factor{n}.dtf1")))?;
            }
            (ModelKind::Cpd, m.rank(), vec![m.rank()], vec![to_f64(&m.weights)], m.shape())
        }
        Model::Hosvd(m) => {
            dtf1::save(&m.core, dir.join("core.dtf1"))?;
            for (n, f) in m.factors.iter().enumerate() {
                dtf1::save_matrix(f, dir.join(format!("factor{n}.dtf1")))?;
            }
            let shape = m.factors.iter().map(|f| f.rows()).collect();
            (ModelKind::Hosvd, 1, m.mlrank().to_vec(), Vec::new(), shape)
        }
        Model::Ll1(m) => {
            let (o, p, q) = m.shape()?;
            for (k, term) in m.terms.iter().enumerate() {
                dtf1::save_matrix(&term.a, dir.join(format!("term{k}_a.dtf1")))?;
                dtf1::save_matrix(&term.b, dir.join(format!("term{k}_b.dtf1")))?;
                dtf1::save_vector(&term.c, dir.join(format!("term{k}_c.dtf1")))?;
            }
            let lambda = m.terms.iter().map(|t| to_f64(&t.lambda)).collect();
            (ModelKind::Ll1, m.terms.len(), m.ranks(), lambda, vec![o, p, q])
        }
    };
    let manifest = BundleManifest {
        kind,
        k,
        ranks,
        lambda,
        fit_history: to_f64(&trace.fit_history),
        seed: trace.seed,
        sweeps: trace.sweeps(),
        converged: trace.converged,
        shape,
        diagnostics: trace.diagnostics.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST), json)?;
    Ok(manifest)
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<BundleManifest> {
    let text = fs::read_to_string(dir.as_ref().join(MANIFEST))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load<T: Scalar>(dir: impl AsRef<Path>) -> Result<(Model<T>, BundleManifest)> {
    let dir = dir.as_ref();
    let man = load_manifest(dir)?;
    let of = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let model = match man.kind {
        ModelKind::Cpd => {
            let factors = (0..man.shape.len())
                .map(|n| dtf1::load_matrix(dir.join(format!("factor{n}.dtf1"))))
                .collect::<Result<Vec<_>>>()?;
            let weights = of(man.lambda.first().ok_or_else(|| Error::format("manifest", "missing CP weights"))?);
            Model::Cpd(KruskalFactors::new(factors, weights)?)
        }
        ModelKind::Hosvd => {
            let core = dtf1::load(dir.join("core.dtf1"))?;
            let factors = (0..core.order())
                .map(|n| dtf1::load_matrix(dir.join(format!("factor{n}.dtf1"))))
                .collect::<Result<Vec<_>>>()?;
            Model::Hosvd(TuckerFactors { core, factors })
        }
        ModelKind::Ll1 => {
            if man.lambda.len() != man.k {
                return Err(Error::format("manifest", "one weight vector per block term required"));
            }
            let terms = (0..man.k)
                .map(|k| {
                    BlockTerm::new(
                        dtf1::load_matrix(dir.join(format!("term{k}_a.dtf1")))?,
                        dtf1::load_matrix(dir.join(format!("term{k}_b.dtf1")))?,
                        dtf1::load_vector(dir.join(format!("term{k}_c.dtf1")))?,
                        of(&man.lambda[k]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Model::Ll1(LL1Factors::new(terms)?)
        }
    };
    Ok((model, man))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{cpd_als, hosvd, ll1_nn, DecompConfig};
    use crate::tensor::DenseTensor;

    fn data() -> DenseTensor<f64> {
        DenseTensor::from_fn(&[3, 4, 2], |i| 1.0 + (i[0] * 7 + i[1] * 3 + i[2] * 5) as f64 % 4.0).unwrap()
    }

    #[test]
    fn roundtrip_all_kinds() {
        let t = data();
        let cfg = DecompConfig { max_sweeps: 10, ..Default::default() };
        let ll1 = ll1_nn(&t, &[2, 1], &cfg).unwrap();
        let cpd = cpd_als(&t, 2, &cfg).unwrap();
        let tucker = hosvd(&t, &[2, 2, 2]).unwrap();
        let cases = [
            (Model::Ll1(ll1.model), ll1.trace),
            (Model::Cpd(cpd.model), cpd.trace),
            (Model::Hosvd(tucker), FitTrace::new(0)),
        ];
        for (model, trace) in cases {
            let dir = tempfile::tempdir().unwrap();
            let man = save(dir.path(), &model, &trace).unwrap();
            let (back, man2) = load::<f64>(dir.path()).unwrap();
            assert_eq!(back, model);
            assert_eq!(man, man2);
            assert_eq!(man.shape, vec![3, 4, 2]);
        }
    }

    #[test]
    fn manifest_keys() {
        let t = data();
        let f = ll1_nn(&t, &[1], &DecompConfig { max_sweeps: 2, seed: 4, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &Model::Ll1(f.model), &f.trace).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        for key in ["type", "K", "ranks", "lambda", "fit_history", "seed", "sweeps"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["type"], "ll1");
        assert_eq!(v["seed"], 4);
    }

    #[test]
    fn missing_bundle_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load::<f64>(dir.path().join("nope")), Err(Error::Io(_))));
    }
}
