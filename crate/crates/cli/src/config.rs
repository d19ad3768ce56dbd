//! The experiment config file.

use std::path::{Path, PathBuf};

use blockterm::classify::ExperimentConfig;
use blockterm::dataset::{face_fixture, load_dataset, load_pgm_tree, EnsembleDataset};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Where the observations come from. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    FaceFixture {
        #[serde(default)]
        seed: u64,
    },
    /// One sub-directory of PGM images per class.
    PgmTree { root: PathBuf },
    /// A directory written by `save_dataset` (e.g. by `blockterm synth`).
    Dataset { dir: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    /// Parse and validate; every problem is a configuration error that names
    /// the offending field and its position.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, Failure> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Failure::config(format!("{}: {e}", origin.display())))?;
        cfg.experiment
            .validate()
            .map_err(|e| Failure::config(format!("{}: field `experiment`: {e}", origin.display())))?;
        let base = origin.parent().unwrap_or(Path::new(""));
        match &mut cfg.dataset {
            DatasetSpec::PgmTree { root: p } | DatasetSpec::Dataset { dir: p } if p.is_relative() => {
                *p = base.join(&*p)
            }
            _ => {}
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn dataset(&self) -> Result<EnsembleDataset<f64>, Failure> {
        Ok(match &self.dataset {
            DatasetSpec::FaceFixture { seed } => face_fixture(*seed)?,
            DatasetSpec::PgmTree { root } => load_pgm_tree(root)?,
            DatasetSpec::Dataset { dir } => load_dataset(dir)?,
        })
    }
}
