//! Minimal classifiers and their evaluation reports.

mod experiment;

pub use experiment::{
    extract_features, run_experiment, run_grid, Cell, ClassifierKind, ExperimentConfig, GridReport, Method,
};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVectors<T> {
    pub vectors: Vec<Vec<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> LabeledVectors<T> {
    pub fn new(vectors: Vec<Vec<T>>, labels: Vec<usize>) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::shape(format!("{} vectors but {} labels", vectors.len(), labels.len())));
        }
        if let Some(first) = vectors.first() {
            if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
                return Err(Error::shape(format!("feature lengths {} and {}", first.len(), bad.len())));
            }
        }
        Ok(Self { vectors, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }
}

fn check_compatible<T: Scalar>(train: &LabeledVectors<T>, test: &LabeledVectors<T>) -> Result<()> {
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    match test.dim() {
        Some(d) if Some(d) != train.dim() => {
            Err(Error::shape(format!("training features have length {}, test {d}", train.dim().unwrap_or(0))))
        }
        _ => Ok(()),
    }
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Euclidean `k`-nearest-neighbour vote. Neighbours at equal distance are
/// taken in training order; vote ties go to the class with the smaller
/// summed distance, then to the lower class id.
pub fn knn_predict<T: Scalar>(train: &LabeledVectors<T>, x: &[T], k: usize) -> usize {
    let mut d: Vec<(T, usize)> = train.vectors.iter().enumerate().map(|(i, v)| (distance(v, x), i)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    // (class, votes, total distance), classes in ascending order
    let mut tally: Vec<(usize, usize, T)> = Vec::new();
    for &(dist, i) in d.iter().take(k.max(1)) {
        let c = train.labels[i];
        match tally.binary_search_by_key(&c, |t| t.0) {
            Ok(pos) => {
                tally[pos].1 += 1;
                tally[pos].2 += dist;
            }
            Err(pos) => tally.insert(pos, (c, 1, dist)),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal)).then(a.0.cmp(&b.0)))
        .map(|t| t.0)
        .expect("non-empty training set")
}

pub fn knn_classify<T: Scalar>(train: &LabeledVectors<T>, test: &LabeledVectors<T>, k: usize) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_compatible(train, test)?;
    let predicted: Vec<usize> = test.vectors.iter().map(|x| knn_predict(train, x, k)).collect();
    Ok(EvalReport::from_predictions(&train.labels, &test.labels, &predicted))
}

/// Per-class means in ascending class order.
pub fn centroids<T: Scalar>(train: &LabeledVectors<T>) -> Result<Vec<(usize, Vec<T>)>> {
    let dim = train.dim().ok_or_else(|| Error::invalid("empty training set"))?;
    let mut classes = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    Ok(classes
        .into_iter()
        .map(|c| {
            let mut sum = vec![T::zero(); dim];
            let mut n = 0usize;
            for (v, _) in train.vectors.iter().zip(&train.labels).filter(|(_, &l)| l == c) {
                sum.iter_mut().zip(v).for_each(|(s, &x)| *s += x);
                n += 1;
            }
            let n = T::of(n as f64);
            (c, sum.into_iter().map(|s| s / n).collect())
        })
        .collect())
}

/// Assign each test vector to the nearest class mean; ties go to the lower class id.
pub fn nearest_centroid<T: Scalar>(train: &LabeledVectors<T>, test: &LabeledVectors<T>) -> Result<EvalReport> {
    check_compatible(train, test)?;
    let cs = centroids(train)?;
    let predicted: Vec<usize> = test
        .vectors
        .iter()
        .map(|x| {
            let mut best = (cs[0].0, distance(&cs[0].1, x));
            for (c, m) in &cs[1..] {
                let d = distance(m, x);
                if d < best.1 {
                    best = (*c, d);
                }
            }
            best.0
        })
        .collect();
    Ok(EvalReport::from_predictions(&train.labels, &test.labels, &predicted))
}

/// Accuracy and confusion counts, optionally aggregated over several runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Correct predictions over all predictions, pooled across runs.
    pub accuracy: f64,
    /// `confusion[i][j]`: samples of `classes[i]` predicted as `classes[j]`.
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<usize>,
    pub per_run: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `per_run` (0 for a single run).
    pub stddev: f64,
}

impl EvalReport {
    pub fn from_predictions(train_labels: &[usize], truth: &[usize], predicted: &[usize]) -> Self {
        let mut classes: Vec<usize> = train_labels.iter().chain(truth).chain(predicted).copied().collect();
        classes.sort_unstable();
        classes.dedup();
        let idx = |c: usize| classes.binary_search(&c).expect("class listed");
        let mut confusion = vec![vec![0; classes.len()]; classes.len()];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[idx(t)][idx(p)] += 1;
        }
        let mut r = Self { accuracy: 0.0, confusion, classes, per_run: Vec::new(), mean: 0.0, stddev: 0.0 };
        r.accuracy = r.pooled_accuracy();
        r.per_run = vec![r.accuracy];
        r.mean = r.accuracy;
        r
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.confusion[i][i]).sum()
    }

    fn pooled_accuracy(&self) -> f64 {
        match self.total() {
            0 => 1.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    /// Pool confusion matrices and collect every run's accuracy.
    pub fn aggregate(runs: &[EvalReport]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::invalid("no runs to aggregate"));
        }
        let mut classes: Vec<usize> = runs.iter().flat_map(|r| r.classes.iter().copied()).collect();
        classes.sort_unstable();
        classes.dedup();
        let idx = |c: usize| classes.binary_search(&c).expect("class listed");
        let mut confusion = vec![vec![0; classes.len()]; classes.len()];
        for r in runs {
            for (i, row) in r.confusion.iter().enumerate() {
                for (j, &n) in row.iter().enumerate() {
                    confusion[idx(r.classes[i])][idx(r.classes[j])] += n;
                }
            }
        }
        let per_run: Vec<f64> = runs.iter().flat_map(|r| r.per_run.iter().copied()).collect();
        let (mean, stddev) = mean_stddev(&per_run);
        let mut out = Self { accuracy: 0.0, confusion, classes, per_run, mean, stddev };
        out.accuracy = out.pooled_accuracy();
        Ok(out)
    }
}

/// Mean and sample standard deviation, summed in sorted order so the result
/// does not depend on the order the runs finished in.
fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    if s.len() < 2 {
        return (mean, 0.0);
    }
    let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
