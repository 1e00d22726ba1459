//! Training configuration: strategy choice and the compression schedule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::ScorerHyper;
use crate::sir::optimizer::OptimizerHyper;

/// The five fine-tuning strategies.
///
/// * `V0` — baseline: a single level trained on the full blocks, no cascade.
/// * `V1` — independent compressors, each fine-tuned from the same base
///   initialization on the previous level's compressed blocks.
/// * `V2` — soft parameter sharing: like V1, but each compressor starts from
///   the previous compressor's trained parameters.
/// * `V3` — hard parameter sharing: one set of parameters scores every
///   level; the loss is the first level's plus the last level's.
/// * `V4` — hard sharing with per-level CPR losses summed over all levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    V0,
    V1,
    V2,
    V3,
    V4,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyKind::V0 => "V0",
            StrategyKind::V1 => "V1",
            StrategyKind::V2 => "V2",
            StrategyKind::V3 => "V3",
            StrategyKind::V4 => "V4",
        };
        f.write_str(name)
    }
}

/// How a level chooses the negatives that survive compression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Keep the k highest-logit negatives (the hardest ones).
    TopK,
    /// Keep k negatives drawn uniformly without replacement.
    Random,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::TopK => "top_k",
            SelectionMode::Random => "random",
        })
    }
}

/// How many negatives survive each compression step, and how they are
/// picked. With `k_per_level = [k1, .., k_{M-1}]` the cascade has M levels;
/// level i+1 trains on k_i negatives plus the positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressorSchedule {
    pub k_per_level: Vec<usize>,
    pub selection_mode: SelectionMode,
    /// Seed of the PCG-64 stream used by random selection (and consumed, in
    /// order, by every selection the run performs).
    pub rng_seed: u64,
}

impl CompressorSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.k_per_level.iter().any(|&k| k == 0) {
            return Err(Error::Config(format!(
                "k_per_level entries must be at least 1, got {:?}",
                self.k_per_level
            )));
        }
        if self.k_per_level.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "k_per_level must be strictly decreasing, got {:?}",
                self.k_per_level
            )));
        }
        Ok(())
    }

    /// Number of cascade levels (compressors), including the first
    /// uncompressed one.
    pub fn num_levels(&self) -> usize {
        self.k_per_level.len() + 1
    }
}

/// Everything a training run needs besides the data itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirConfig {
    pub strategy: StrategyKind,
    pub schedule: CompressorSchedule,
    /// Passes over the blocks. V1/V2 run this many epochs per compressor
    /// phase; the jointly trained strategies run it once over the cascade.
    pub epochs: u32,
    /// Blocks per optimizer update; block losses are averaged.
    pub batch_blocks: usize,
    /// Hard cap on optimizer updates across the whole run, if set.
    #[serde(default)]
    pub max_updates: Option<u64>,
    #[serde(default)]
    pub optimizer: OptimizerHyper,
    pub scorer: ScorerHyper,
}

impl SirConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.scorer.validate()?;
        if self.batch_blocks == 0 {
            return Err(Error::Config("batch_blocks must be at least 1".into()));
        }
        match self.strategy {
            StrategyKind::V0 => {
                if !self.schedule.k_per_level.is_empty() {
                    return Err(Error::Config(format!(
                        "strategy V0 has no compression levels; k_per_level must be empty, \
                         got {:?}",
                        self.schedule.k_per_level
                    )));
                }
            }
            _ => {
                if self.schedule.k_per_level.is_empty() {
                    return Err(Error::Config(format!(
                        "strategy {} needs at least one compression level in k_per_level",
                        self.strategy
                    )));
                }
            }
        }
        if self.max_updates == Some(0) {
            return Err(Error::Config("max_updates must be at least 1 when set".into()));
        }
        Ok(())
    }
}
