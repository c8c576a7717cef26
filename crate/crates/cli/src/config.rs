//! Experiment configuration: a TOML file with `[data]`, `[split]`,
//! `[train]`, `[run]`, `[export]`, `[sweep]` and `[synth]` sections.
//! Every key is optional; relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use dualrec::corpus::{Domain, SplitSpec};
use dualrec::model::{TrainConfig, DROPOUT_GRID, L2_GRID, LAMBDA_GRID, LR_GRID, TAU_GRID};
use dualrec::synth::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Raw interaction file of domain A.
    pub domain_a: Option<PathBuf>,
    pub domain_b: Option<PathBuf>,
    pub n_core: usize,
    /// Processed dataset directory, written by `preprocess`.
    pub processed: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            domain_a: None,
            domain_b: None,
            n_core: 10,
            processed: PathBuf::from("processed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Training seeds; empty means `[train.seed]`.
    pub seeds: Vec<u64>,
    /// Domains evaluated as target, each with its own split.
    pub targets: Vec<Domain>,
    pub ks: Vec<usize>,
    /// Negatives per user for sampled ranking; 0 ranks every item.
    pub sampled_candidates: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs"),
            seeds: Vec::new(),
            targets: Domain::BOTH.to_vec(),
            ks: vec![10, 20],
            sampled_candidates: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub attention: bool,
    pub embeddings: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            attention: true,
            embeddings: true,
        }
    }
}

/// Axes of a grid sweep. An empty axis keeps the `[train]` value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lr: Vec<f64>,
    pub l2: Vec<f64>,
    pub dropout: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda_en: Vec<f64>,
    pub lambda_de: Vec<f64>,
    pub lambda_item: Vec<f64>,
}

impl SweepConfig {
    /// `(name, values, grid)` for every axis, in a fixed order.
    pub fn axes(&self) -> [(&'static str, &[f64], &'static [f64]); 7] {
        [
            ("lr", &self.lr, &LR_GRID),
            ("l2", &self.l2, &L2_GRID),
            ("dropout", &self.dropout, &DROPOUT_GRID),
            ("tau", &self.tau, &TAU_GRID),
            ("lambda_en", &self.lambda_en, &LAMBDA_GRID),
            ("lambda_de", &self.lambda_de, &LAMBDA_GRID),
            ("lambda_item", &self.lambda_item, &LAMBDA_GRID),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub run: RunConfig,
    pub export: ExportConfig,
    pub sweep: SweepConfig,
    pub synth: SynthSpec,
}

fn on_grid(v: f64, grid: &[f64]) -> bool {
    grid.iter()
        .any(|&g| (g - v).abs() <= 1e-12 * g.abs().max(1.0))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    /// Reads `path` and resolves its relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.domain_a.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.domain_b.as_mut() {
            fix(p);
        }
        fix(&mut self.data.processed);
        fix(&mut self.run.out_dir);
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.run.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.run.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.split.validate()?;
        self.train.validate()?;
        if self.data.n_core == 0 {
            return bad("data.n_core must be at least 1".into());
        }
        if self.run.ks.is_empty() || self.run.ks.contains(&0) {
            return bad("run.ks must be a non-empty list of positive cut-offs".into());
        }
        if self.run.targets.is_empty() {
            return bad("run.targets must name at least one domain".into());
        }
        for (name, values, grid) in self.sweep.axes() {
            if let Some(v) = values.iter().find(|&&v| !on_grid(v, grid)) {
                return bad(format!(
                    "sweep.{name} value {v} is not in the search grid {grid:?}"
                ));
            }
        }
        Ok(())
    }

    /// Hyperparameters outside the published search grids.
    pub fn off_grid(&self) -> Vec<&'static str> {
        self.train.off_grid()
    }
}
