//! The experiment config file: training setup plus data source and metric
//! cutoffs, with dotted-path overrides and master-seed derivation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sir_core::data::SyntheticSpec;
use sir_core::sir::OptimizerHyper;
use sir_core::{
    CompressorSchedule, Error, Result, ScorerHyper, SirConfig, StrategyKind,
};

/// One experiment, fully specified: everything `SirConfig` carries, plus
/// where the data comes from and which cutoffs to report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: StrategyKind,
    pub schedule: CompressorSchedule,
    pub epochs: u32,
    pub batch_blocks: usize,
    #[serde(default)]
    pub max_updates: Option<u64>,
    #[serde(default)]
    pub optimizer: OptimizerHyper,
    pub scorer: ScorerHyper,
    pub data: DataConfig,
    #[serde(default)]
    pub cutoffs: Cutoffs,
}

/// Where training blocks and the eval split come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataConfig {
    Synthetic(SyntheticDataConfig),
    Files(FilesDataConfig),
}

/// Generated corpora. When `eval` is omitted, the eval split reuses the
/// train spec with `seed + 1`, so train and eval never share documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataConfig {
    pub train: SyntheticSpec,
    #[serde(default)]
    pub eval: Option<SyntheticSpec>,
}

/// On-disk tables. The eval split defaults to the training tables unless
/// the `eval_*` paths are given; the corpus is always shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesDataConfig {
    pub queries: PathBuf,
    pub corpus: PathBuf,
    pub candidates: PathBuf,
    pub qrels: PathBuf,
    pub negatives_per_query: usize,
    #[serde(default)]
    pub assembly_seed: u64,
    #[serde(default)]
    pub eval_queries: Option<PathBuf>,
    #[serde(default)]
    pub eval_candidates: Option<PathBuf>,
    #[serde(default)]
    pub eval_qrels: Option<PathBuf>,
}

/// Metric cutoffs for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cutoffs {
    #[serde(default = "default_mrr_cutoffs")]
    pub mrr: Vec<usize>,
    #[serde(default = "default_map_cutoffs")]
    pub map: Vec<usize>,
    #[serde(default = "default_ndcg_cutoffs")]
    pub ndcg: Vec<usize>,
}

fn default_mrr_cutoffs() -> Vec<usize> {
    vec![10, 100]
}

fn default_map_cutoffs() -> Vec<usize> {
    vec![20]
}

fn default_ndcg_cutoffs() -> Vec<usize> {
    vec![20]
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs {
            mrr: default_mrr_cutoffs(),
            map: default_map_cutoffs(),
            ndcg: default_ndcg_cutoffs(),
        }
    }
}

impl Cutoffs {
    fn validate(&self) -> Result<()> {
        for (name, list) in [("mrr", &self.mrr), ("map", &self.map), ("ndcg", &self.ndcg)] {
            if list.iter().any(|&k| k == 0) {
                return Err(Error::Config(format!(
                    "cutoffs.{name} entries must be at least 1, got {list:?}"
                )));
            }
        }
        Ok(())
    }
}

impl DataConfig {
    fn validate(&self) -> Result<()> {
        match self {
            DataConfig::Synthetic(s) => {
                s.train.validate()?;
                if let Some(eval) = &s.eval {
                    eval.validate()?;
                }
                Ok(())
            }
            DataConfig::Files(f) => {
                if f.negatives_per_query == 0 {
                    return Err(Error::Config(
                        "data.files.negatives_per_query must be at least 1".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn apply_seed(&mut self, seed: u64) {
        match self {
            DataConfig::Synthetic(s) => {
                s.train.seed = seed;
                if let Some(eval) = &mut s.eval {
                    eval.seed = seed + 1;
                }
            }
            DataConfig::Files(f) => f.assembly_seed = seed,
        }
    }
}

impl RunConfig {
    /// The training-facing slice of this config.
    pub fn sir(&self) -> SirConfig {
        SirConfig {
            strategy: self.strategy,
            schedule: self.schedule.clone(),
            epochs: self.epochs,
            batch_blocks: self.batch_blocks,
            max_updates: self.max_updates,
            optimizer: self.optimizer.clone(),
            scorer: self.scorer.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sir().validate()?;
        self.data.validate()?;
        self.cutoffs.validate()
    }

    /// Derive every seed in the config from one master seed: the scorer
    /// initialization gets `N`, selection gets `N + 1`, the data source gets
    /// `N + 2` (and a synthetic eval split `N + 3`).
    pub fn apply_master_seed(&mut self, seed: u64) {
        self.scorer.seed = seed;
        self.schedule.rng_seed = seed + 1;
        self.data.apply_seed(seed + 2);
    }
}

/// Parse `PATH=VALUE` and apply it to the JSON config tree. The value is
/// parsed as JSON when possible and taken as a bare string otherwise, so
/// `--set strategy=V4`, `--set optimizer.lr=1e-4`, and
/// `--set schedule.k_per_level=[11,5]` all work.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{spec}' is not of the form PATH=VALUE"))
    })?;
    if path.is_empty() {
        return Err(Error::Config(format!("override '{spec}' has an empty path")));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));

    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let object = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "cannot set '{path}': '{}' is not an object",
                segments[..i].join(".")
            ))
        })?;
        if i == segments.len() - 1 {
            object.insert(segment.to_string(), value);
            return Ok(());
        }
        cursor = object
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    unreachable!("split('.') yields at least one segment");
}

fn typed_from_value(value: Value) -> Result<RunConfig> {
    let deserializer = value;
    serde_path_to_error::deserialize(deserializer).map_err(|e| {
        Error::Config(format!("config field '{}': {}", e.path(), e.inner()))
    })
}

/// Load a config file, apply `--set` overrides and the master seed, and
/// return both the validated typed config and the resolved JSON tree (the
/// exact content the manifest records).
///
/// A `manifest.json` written by a previous run is accepted in place of a
/// config file: its embedded `config` object is used, which is what makes a
/// run reproducible from its own output directory.
pub fn load_config(path: &Path, sets: &[String], seed: Option<u64>) -> Result<(RunConfig, Value)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let mut root: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?;
    if let Some(embedded) = root.get("config") {
        if root.get("run_id").is_some() {
            root = embedded.clone();
        }
    }
    for spec in sets {
        apply_override(&mut root, spec)?;
    }
    let mut config = typed_from_value(root)?;
    if let Some(seed) = seed {
        config.apply_master_seed(seed);
    }
    config.validate()?;
    let resolved = serde_json::to_value(&config)
        .map_err(|e| Error::Internal(format!("re-serializing config: {e}")))?;
    Ok((config, resolved))
}
