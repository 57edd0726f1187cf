use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fscil::pipeline::ExperimentConfig;
use fscil::protocol::{StreamConfig, SyntheticConfig};
use fscil::semantic::SimilarityMode;
use fscil::trainer::{HyperBase, IncrementalHyper};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub embeddings: PathBuf,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Extra embedding files keyed by source tag, for the embedding ablation.
    #[serde(default)]
    pub sources: BTreeMap<String, PathBuf>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Values swept by `ablate` when `--values` is not given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub k: Vec<usize>,
    pub similarity: Vec<SimilarityMode>,
    pub embedding: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_method")]
    pub method: String,
    pub paths: Paths,
    /// Generator settings for `gen-data`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    /// Noise level per extra embedding source written by `gen-data`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub source_noise: BTreeMap<String, f64>,
    pub stream: StreamConfig,
    #[serde(default)]
    pub base: HyperBase,
    #[serde(default)]
    pub incremental: IncrementalHyper,
    #[serde(default)]
    pub ablation: Ablation,
    pub seeds: Vec<u64>,
}

fn default_method() -> String {
    "ours".into()
}

impl RunConfig {
    /// Reads `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seed list must be non-empty".into()));
        }
        if self.method.is_empty() || self.method.contains([',', '\n', '|', '"']) {
            return Err(CliError::Config(format!("method label {:?} cannot be tabulated", self.method)));
        }
        self.stream.validate()?;
        self.base.validate()?;
        self.incremental.validate()?;
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            stream: self.stream.clone(),
            base: self.base.clone(),
            incremental: self.incremental.clone(),
        }
    }

    pub fn hash(&self) -> String {
        fscil::eval::config_hash(&serde_json::to_value(self).expect("config serialises"))
    }

    pub fn hyper_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "stream": self.stream,
            "base": self.base,
            "incremental": self.incremental,
        })
    }
}

/// A loaded config with its paths resolved against the config's directory.
pub struct Resolved {
    pub cfg: RunConfig,
    root: PathBuf,
    out_override: Option<PathBuf>,
}

impl Resolved {
    pub fn new(cfg: RunConfig, root: PathBuf, out_override: Option<PathBuf>) -> Self {
        Self { cfg, root, out_override }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn dataset(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.dataset)
    }

    pub fn embeddings(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.embeddings)
    }

    pub fn source(&self, tag: &str) -> Result<PathBuf, CliError> {
        self.cfg
            .paths
            .sources
            .get(tag)
            .map(|p| self.resolve(p))
            .ok_or_else(|| CliError::Config(format!("no embedding source tagged {tag:?} in paths.sources")))
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.out_override {
            Some(p) => p.clone(),
            None => self.resolve(&self.cfg.paths.output_dir),
        }
    }

    /// Checks that the inputs a training command reads are present.
    pub fn require_inputs(&self) -> Result<(), CliError> {
        for p in [self.dataset(), self.embeddings()] {
            if !p.is_file() {
                return Err(CliError::Config(format!("missing input file {}", p.display())));
            }
        }
        Ok(())
    }
}
