//! Group-wise train/test evaluation of raw pixels against individual
//! features.
//!
//! For each realization the ensemble is dealt into groups holding one image
//! per class. Every training group is decomposed on its own and split into
//! common and individual parts; the classifiers are trained on the
//! vectorised individual parts. Test images are the original images: their
//! weights against the union of all training banks are estimated by NNLS and
//! the weighted common part is subtracted before vectorising.

use serde::{Deserialize, Serialize};

use crate::classify::{knn_classify, nearest_centroid, EvalReport, LabeledVectors};
use crate::dataset::{make_group_splits, EnsembleDataset, SplitPlan};
use crate::decomp::{ll1_nn_best, DecompConfig};
use crate::error::{Error, Result};
use crate::features::{build_feature_bank, split_features, CommonFeatureBank, SubsetRule};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Vectorised original images.
    Raw,
    /// Rank-1 terms with non-negative mixing (`cpd_rank` of them).
    Cpd,
    /// Block terms of ranks `ll1_ranks`.
    Ll1,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Cpd => "cpd",
            Method::Ll1 => "ll1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Knn,
    NearestCentroid,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::NearestCentroid => "nearest-centroid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub classifiers: Vec<ClassifierKind>,
    /// Neighbours for k-NN.
    pub k: usize,
    pub ll1_ranks: Vec<usize>,
    pub cpd_rank: usize,
    pub decomp: DecompConfig,
    pub restarts: usize,
    pub subset_rule: SubsetRule,
    pub groups: usize,
    pub train_groups: usize,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Raw, Method::Cpd, Method::Ll1],
            classifiers: vec![ClassifierKind::Knn, ClassifierKind::NearestCentroid],
            k: 1,
            ll1_ranks: vec![2, 2],
            cpd_rank: 2,
            decomp: DecompConfig { max_sweeps: 100, rel_tol: 1e-6, ..Default::default() },
            restarts: 1,
            subset_rule: SubsetRule::default(),
            groups: 10,
            train_groups: 6,
            realizations: 100,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.decomp.validate()?;
        SubsetRule::new(self.subset_rule.tau)?;
        if self.methods.is_empty() || self.classifiers.is_empty() {
            return Err(Error::invalid("at least one method and one classifier are required"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be at least 1"));
        }
        if self.ll1_ranks.is_empty() || self.ll1_ranks.contains(&0) || self.cpd_rank == 0 {
            return Err(Error::invalid("decomposition ranks must be positive"));
        }
        if self.train_groups == 0 || self.train_groups >= self.groups {
            return Err(Error::invalid(format!(
                "need 1 <= train_groups < groups, got {} of {}",
                self.train_groups, self.groups
            )));
        }
        Ok(())
    }

    fn ranks_for(&self, method: Method) -> Option<Vec<usize>> {
        match method {
            Method::Raw => None,
            Method::Cpd => Some(vec![1; self.cpd_rank]),
            Method::Ll1 => Some(self.ll1_ranks.clone()),
        }
    }

    /// The split used by realization `r`.
    pub fn plan(&self, labels: &[usize], r: usize) -> Result<SplitPlan> {
        make_group_splits(labels, self.groups, self.train_groups, derive_seed(self.seed, "realization", r as u64))
    }
}

/// Training and test features of one realization.
pub fn extract_features<T: Scalar>(
    ds: &EnsembleDataset<T>,
    plan: &SplitPlan,
    method: Method,
    cfg: &ExperimentConfig,
) -> Result<(LabeledVectors<T>, LabeledVectors<T>)> {
    let test_idx = plan.test_indices();
    let labels_of = |idx: &[usize]| idx.iter().map(|&q| ds.labels[q]).collect::<Vec<_>>();
    let images = |idx: &[usize]| idx.iter().map(|&q| ds.image(q)).collect::<Result<Vec<_>>>();

    let Some(ranks) = cfg.ranks_for(method) else {
        let train_idx = plan.train_indices();
        let vecs =
            |idx: &[usize]| -> Result<Vec<Vec<T>>> { Ok(images(idx)?.into_iter().map(|m| m.into_data()).collect()) };
        return Ok((
            LabeledVectors::new(vecs(&train_idx)?, labels_of(&train_idx))?,
            LabeledVectors::new(vecs(&test_idx)?, labels_of(&test_idx))?,
        ));
    };

    let mut banks = Vec::with_capacity(plan.train_groups.len());
    let mut train_vecs = Vec::new();
    let mut train_labels = Vec::new();
    for &g in &plan.train_groups {
        let idx = &plan.groups[g];
        let group = ds.select(idx)?;
        let decomp = DecompConfig { seed: derive_seed(plan.seed, "group", g as u64), ..cfg.decomp.clone() };
        let fitted = ll1_nn_best(&group.tensor, &ranks, &decomp, cfg.restarts).map_err(|e| e.in_group(g))?;
        let bank = build_feature_bank(&fitted.model).map_err(|e| e.in_group(g))?;
        let split = split_features(&group.tensor, &bank, &cfg.subset_rule).map_err(|e| e.in_group(g))?;
        train_vecs.extend(split.individual.into_iter().map(|m| m.into_data()));
        train_labels.extend(labels_of(idx));
        banks.push(bank);
    }
    let merged = CommonFeatureBank::merge(&banks)?;
    let test = merged.project(&images(&test_idx)?, &cfg.subset_rule)?;
    Ok((
        LabeledVectors::new(train_vecs, train_labels)?,
        LabeledVectors::new(test.individual.into_iter().map(|m| m.into_data()).collect(), labels_of(&test_idx))?,
    ))
}

fn evaluate<T: Scalar>(
    kind: ClassifierKind,
    train: &LabeledVectors<T>,
    test: &LabeledVectors<T>,
    k: usize,
) -> Result<EvalReport> {
    match kind {
        ClassifierKind::Knn => knn_classify(train, test, k),
        ClassifierKind::NearestCentroid => nearest_centroid(train, test),
    }
}

/// One `(method, classifier)` cell over `cfg.realizations` seeded splits.
pub fn run_experiment<T: Scalar>(
    ds: &EnsembleDataset<T>,
    method: Method,
    classifier: ClassifierKind,
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    let cfg = ExperimentConfig { methods: vec![method], classifiers: vec![classifier], ..cfg.clone() };
    let grid = run_grid(ds, &cfg)?;
    Ok(grid.cells.into_iter().next().expect("one cell").report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub classifier: ClassifierKind,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub realizations: usize,
    pub cells: Vec<Cell>,
}

impl GridReport {
    pub fn cell(&self, method: Method, classifier: ClassifierKind) -> Option<&EvalReport> {
        self.cells.iter().find(|c| c.method == method && c.classifier == classifier).map(|c| &c.report)
    }

    /// One row per realization and cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,classifier,realization,accuracy\n");
        for c in &self.cells {
            for (r, acc) in c.report.per_run.iter().enumerate() {
                out.push_str(&format!("{},{},{r},{acc}\n", c.method.name(), c.classifier.name()));
            }
        }
        out
    }

    /// Methods as rows and classifiers as columns, in percent.
    pub fn table(&self) -> serde_json::Value {
        let mut methods: Vec<Method> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method) {
                methods.push(c.method);
            }
        }
        let rows: Vec<serde_json::Value> = methods
            .iter()
            .map(|&m| {
                let mut row = serde_json::Map::new();
                row.insert("method".into(), m.name().into());
                for c in self.cells.iter().filter(|c| c.method == m) {
                    row.insert(
                        c.classifier.name().into(),
                        serde_json::json!({
                            "mean_percent": 100.0 * c.report.mean,
                            "stddev_percent": 100.0 * c.report.stddev,
                        }),
                    );
                }
                row.into()
            })
            .collect();
        serde_json::json!({ "realizations": self.realizations, "rows": rows })
    }
}

/// Every configured `(method, classifier)` cell. Features are computed once
/// per method and realization and shared by the classifiers.
pub fn run_grid<T: Scalar>(ds: &EnsembleDataset<T>, cfg: &ExperimentConfig) -> Result<GridReport> {
    cfg.validate()?;
    let mut runs: Vec<Vec<EvalReport>> =
        vec![Vec::with_capacity(cfg.realizations); cfg.methods.len() * cfg.classifiers.len()];
    for r in 0..cfg.realizations {
        let plan = cfg.plan(&ds.labels, r)?;
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let (train, test) = extract_features(ds, &plan, method, cfg)?;
            for (ci, &kind) in cfg.classifiers.iter().enumerate() {
                runs[mi * cfg.classifiers.len() + ci].push(evaluate(kind, &train, &test, cfg.k)?);
            }
        }
    }
    let mut cells = Vec::with_capacity(runs.len());
    for (i, reports) in runs.iter().enumerate() {
        cells.push(Cell {
            method: cfg.methods[i / cfg.classifiers.len()],
            classifier: cfg.classifiers[i % cfg.classifiers.len()],
            report: EvalReport::aggregate(reports)?,
        });
    }
    Ok(GridReport { realizations: cfg.realizations, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{face_fixture, Source};
    use crate::tensor::DenseTensor;

    fn ci_config() -> ExperimentConfig {
        ExperimentConfig { groups: 6, train_groups: 4, realizations: 3, ..Default::default() }
    }

    #[test]
    fn single_class_is_always_right() {
        let t = DenseTensor::from_fn(&[3, 3, 4], |i| (i[0] + i[1] * i[2]) as f64 + 1.0).unwrap();
        let ds = EnsembleDataset::new(t, vec![0; 4], Source::FaceFixture { seed: 0 }).unwrap();
        let cfg = ExperimentConfig {
            groups: 4,
            train_groups: 2,
            realizations: 2,
            ll1_ranks: vec![1],
            cpd_rank: 1,
            ..Default::default()
        };
        let grid = run_grid(&ds, &cfg).unwrap();
        assert!(grid.cells.iter().all(|c| c.report.accuracy == 1.0));
    }

    #[test]
    fn deterministic_and_shaped() {
        let ds = face_fixture::<f64>(1).unwrap();
        let cfg = ExperimentConfig { methods: vec![Method::Raw, Method::Ll1], ..ci_config() };
        let a = run_grid(&ds, &cfg).unwrap();
        let b = run_grid(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 4);
        let r = a.cell(Method::Ll1, ClassifierKind::Knn).unwrap();
        assert_eq!(r.per_run.len(), 3);
        assert_eq!(r.total(), 3 * 2 * 4);
        assert_eq!(a.to_csv().lines().count(), 1 + 4 * 3);
        assert_eq!(a.table()["rows"][1]["method"], "ll1");
    }

    #[test]
    fn invalid_configs() {
        let ds = face_fixture::<f64>(1).unwrap();
        for cfg in [
            ExperimentConfig { k: 0, ..ci_config() },
            ExperimentConfig { realizations: 0, ..ci_config() },
            ExperimentConfig { train_groups: 6, ..ci_config() },
            ExperimentConfig { ll1_ranks: vec![], ..ci_config() },
            ExperimentConfig { methods: vec![], ..ci_config() },
        ] {
            assert!(run_grid(&ds, &cfg).is_err());
        }
        // 6 samples per class cannot fill 10 groups
        assert!(run_grid(&ds, &ExperimentConfig::default()).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"realizations": 10, "methods": ["raw", "ll1"]}"#).unwrap();
        assert_eq!(cfg.realizations, 10);
        assert_eq!(cfg.methods, vec![Method::Raw, Method::Ll1]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"realisations": 10}"#).is_err());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
