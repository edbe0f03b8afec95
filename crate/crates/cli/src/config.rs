//! TOML run configuration.
//!
//! ```toml
//! [prior]          # PriorSpec fields; omitted ones keep their defaults
//! ard = false
//! log_xi_sq = [{ mean = 0.0, sd = 4.0 }]
//!
//! [chain]          # ChainConfig fields
//! n_iterations = 2000
//! burn_in = 200
//! mixture = "dirichlet"   # or "single"
//! expert = "mnl"          # or "cormnl"
//!
//! [sim]            # SimSpec fields
//! which = "sim1"
//!
//! [data]
//! train = "train.csv"
//! test = "test.csv"
//! center = true
//!
//! [hierarchy]
//! path = "folds.tsv"
//!
//! [sources]        # extra covariate blocks appended after [data]
//! train = ["ss_train.csv"]
//! test = ["ss_test.csv"]
//!
//! [predict]
//! n_g0_draws = 10
//!
//! [experiment]
//! id = "sim1"
//! repetitions = 10
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dpmnl::data::{DataSchema, SimSpec};
use dpmnl::engine::ChainConfig;
use dpmnl::model::PriorSpec;
use dpmnl::predictor::PredictorConfig;
use dpmnl::{Error, Result};

use crate::experiment::ExperimentSpec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub n_classes: Option<usize>,
    /// Source blocks of the main files as 1-based inclusive column ranges.
    pub blocks: Option<Vec<[usize; 2]>>,
    /// Subtract the training column means from train and test.
    pub center: bool,
    /// Append all pairwise products (after centring).
    pub quadratic: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchySection {
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourcesSection {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `None` uses the experiment's default prior.
    pub prior: Option<PriorSpec>,
    /// `None` uses the experiment's default chain settings.
    pub chain: Option<ChainConfig>,
    pub sim: SimSpec,
    pub data: DataSection,
    pub hierarchy: HierarchySection,
    pub sources: SourcesSection,
    pub predict: PredictorConfig,
    pub experiment: ExperimentSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))
    }

    /// Reads a config file; relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::MissingInput(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [&mut self.data.train, &mut self.data.test, &mut self.hierarchy.path]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.sources.train.iter_mut().for_each(fix);
        self.sources.test.iter_mut().for_each(fix);
    }

    pub fn prior(&self) -> PriorSpec {
        self.prior.clone().unwrap_or_else(|| self.experiment.default_prior())
    }

    pub fn chain(&self) -> ChainConfig {
        self.chain.clone().unwrap_or_else(|| self.experiment.default_chain())
    }

    pub fn schema(&self) -> DataSchema {
        DataSchema {
            n_classes: self.data.n_classes,
            sources: self.data.blocks.clone(),
            hierarchy: self.hierarchy.path.clone(),
        }
    }
}
