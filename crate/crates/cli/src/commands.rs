use std::fs;
use std::path::{Path, PathBuf};

use blockterm::classify::run_grid;
use blockterm::dataset::{face_fixture, save_dataset, synthetic_color_ensemble};
use blockterm::decomp::bundle::{self, Model};
use blockterm::decomp::Init;
use blockterm::{
    build_feature_bank, cpd_als_best, dtf1, fit_error, hosvd, ll1_nn_best, split_features, DecompConfig, FitTrace,
    SubsetRule, Tensor,
};
use clap::Args;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{default_out, Failure, MethodArg, SynthKind};

/// Exit code and the JSON summary printed on success.
pub type Outcome = Result<(u8, Value), Failure>;

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Order-3 DTF1 tensor.
    input: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// CP rank (cpd), per-term ranks L_k (ll1) or the multilinear rank
    /// (hosvd; defaults to the full shape).
    #[arg(long, value_delimiter = ',')]
    ranks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative change of the fit below which a run stops.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    /// Independent random starts; the best fit is kept.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum InitArg {
    Random,
    HosvdBased,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Order-3 DTF1 tensor of observations.
    input: PathBuf,
    /// LL1 bundle written by `decompose --method ll1`.
    bank: PathBuf,
    /// Subset threshold: keep term k for observation n when its weight
    /// exceeds tau times the largest weight of n.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Estimate weights by NNLS even when the observation count matches the
    /// bundle (needed for observations the bundle was not fitted to).
    #[arg(long)]
    project: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// JSON file: {"dataset": {...}, "experiment": {...}}.
    config: PathBuf,
    /// Print the resolved configuration and splits without running.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image height of the colour ensemble.
    #[arg(long)]
    height: Option<usize>,
    /// Image width of the colour ensemble.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_tensor(path: &Path) -> Result<Tensor, Failure> {
    dtf1::load(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn decompose(a: DecomposeArgs) -> Outcome {
    let t = load_tensor(&a.input)?;
    if t.order() != 3 {
        return Err(Failure::config(format!(
            "expected an order-3 tensor, {} has order {}",
            a.input.display(),
            t.order()
        )));
    }
    if a.restarts == 0 {
        return Err(Failure::config("--restarts must be at least 1"));
    }
    let cfg = DecompConfig {
        max_sweeps: a.max_sweeps,
        rel_tol: a.tol,
        seed: a.seed,
        init: match a.init {
            InitArg::Random => Init::Random,
            InitArg::HosvdBased => Init::HosvdBased,
        },
    };
    cfg.validate()?;
    let (model, trace) = match a.method {
        MethodArg::Cpd => {
            let [rank] = a.ranks[..] else {
                return Err(Failure::config("cpd takes a single rank, e.g. --ranks 3"));
            };
            let f = cpd_als_best(&t, rank, &cfg, a.restarts)?;
            (Model::Cpd(f.model), f.trace)
        }
        MethodArg::Ll1 => {
            if a.ranks.is_empty() {
                return Err(Failure::config("ll1 needs one rank per block term, e.g. --ranks 2,2"));
            }
            let f = ll1_nn_best(&t, &a.ranks, &cfg, a.restarts)?;
            (Model::Ll1(f.model), f.trace)
        }
        MethodArg::Hosvd => {
            let mlrank = if a.ranks.is_empty() { t.shape().to_vec() } else { a.ranks.clone() };
            let h = hosvd(&t, &mlrank)?;
            let fit = fit_error(&t, &h)?;
            let trace = FitTrace { fit_history: vec![fit], converged: true, ..FitTrace::new(a.seed) };
            (Model::Hosvd(h), trace)
        }
    };
    let out = a.out.unwrap_or_else(|| default_out("decompose"));
    let manifest = bundle::save(&out, &model, &trace).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let status = if trace.converged { "converged" } else { "not-converged" };
    eprintln!("blockterm decompose: {status} after {} sweeps, fit {:.3e}", trace.sweeps(), trace.final_fit());
    let summary = json!({
        "status": status,
        "method": manifest.kind,
        "ranks": manifest.ranks,
        "fit": trace.final_fit(),
        "sweeps": trace.sweeps(),
        "out": out,
    });
    Ok((if trace.converged { 0 } else { 4 }, summary))
}

pub fn split(a: SplitArgs) -> Outcome {
    let rule = SubsetRule::new(a.tau)?;
    let t = load_tensor(&a.input)?;
    let (model, _) = bundle::load::<f64>(&a.bank).map_err(|e| Failure::io(format!("{}: {e}", a.bank.display())))?;
    let Model::Ll1(factors) = model else {
        return Err(Failure::config(format!("{} is not an ll1 bundle", a.bank.display())));
    };
    let bank = build_feature_bank(&factors)?;
    let project = a.project || t.order() == 3 && t.shape()[2] != bank.mixing.rows();
    let split = if project {
        eprintln!("blockterm split: estimating weights of {} observations by NNLS", t.shape().get(2).unwrap_or(&0));
        bank.project(&t.frontal_slices()?, &rule)?
    } else {
        split_features(&t, &bank, &rule)?
    };
    let out = a.out.unwrap_or_else(|| default_out("split"));
    let manifest = blockterm::features::save_split(&out, &split, &rule)
        .map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let ratio = split.individual_tensor()?.norm_frobenius() / t.norm_frobenius().max(f64::MIN_POSITIVE);
    Ok((
        0,
        json!({
            "status": "ok",
            "tau": a.tau,
            "projected": project,
            "selected": manifest.selected,
            "individual_ratio": ratio,
            "out": out,
        }),
    ))
}

pub fn experiment(a: ExperimentArgs) -> Outcome {
    let cfg = RunConfig::load(&a.config)?;
    let ds = cfg.dataset()?;
    let exp = &cfg.experiment;
    if a.dry_run {
        let plans = (0..exp.realizations)
            .map(|r| {
                let p = exp.plan(&ds.labels, r)?;
                Ok(json!({ "realization": r, "train_groups": p.train_groups, "test_groups": p.test_groups }))
            })
            .collect::<Result<Vec<Value>, blockterm::Error>>()?;
        return Ok((
            0,
            json!({
                "status": "dry-run",
                "config": cfg,
                "observations": ds.len(),
                "shape": ds.tensor.shape(),
                "classes": ds.classes().len(),
                "plans": plans,
            }),
        ));
    }
    let out = a.out.unwrap_or_else(|| default_out("experiment"));
    create_dir(&out)?;
    eprintln!(
        "blockterm experiment: {} observations, {} realizations, {} cells",
        ds.len(),
        exp.realizations,
        exp.methods.len() * exp.classifiers.len()
    );
    let grid = run_grid(&ds, exp)?;
    write_file(&out.join("config.json"), pretty(&cfg))?;
    write_file(&out.join("results.csv"), grid.to_csv())?;
    write_file(&out.join("table.json"), pretty(&grid.table()))?;
    write_file(&out.join("report.json"), pretty(&grid))?;
    let cells: Vec<Value> = grid
        .cells
        .iter()
        .map(|c| {
            json!({
                "method": c.method,
                "classifier": c.classifier,
                "mean": c.report.mean,
                "stddev": c.report.stddev,
            })
        })
        .collect();
    Ok((0, json!({ "status": "ok", "realizations": grid.realizations, "cells": cells, "out": out })))
}

pub fn synth(a: SynthArgs) -> Outcome {
    let out = a.out.unwrap_or_else(|| default_out("synth"));
    let (ds, mixing) = match a.kind {
        SynthKind::ColorEnsemble => {
            let (ds, truth) = synthetic_color_ensemble::<f64>(a.height.unwrap_or(16), a.width.unwrap_or(16), a.seed)?;
            let rows: Vec<Vec<f64>> = (0..truth.mixing.rows()).map(|n| truth.mixing.row(n)).collect();
            (ds, Some(rows))
        }
        SynthKind::FaceFixture => {
            if a.height.is_some() || a.width.is_some() {
                return Err(Failure::config("the face fixture has a fixed image size"));
            }
            (face_fixture::<f64>(a.seed)?, None)
        }
    };
    save_dataset(&out, &ds).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    if let Some(rows) = &mixing {
        write_file(&out.join("truth.json"), pretty(&json!({ "mixing": rows })))?;
    }
    Ok((
        0,
        json!({
            "status": "ok",
            "shape": ds.tensor.shape(),
            "labels": ds.labels,
            "mixing": mixing,
            "out": out,
        }),
    ))
}
