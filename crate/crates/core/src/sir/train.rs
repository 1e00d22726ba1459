//! The training loops for strategies V0–V4.
//!
//! Two shapes of loop exist:
//!
//! * **Phase-trained** (V1, V2): each cascade level is a separate
//!   fine-tuning phase with its own optimizer state. After a phase finishes,
//!   its compressor re-scores the blocks it just trained on and the selected
//!   negatives become the next phase's (static) training set. V1 starts every
//!   phase from the same base initialization; V2 starts from the previous
//!   phase's trained parameters.
//! * **Jointly trained** (V0, V3, V4): a single parameter set scores the
//!   whole cascade inside every forward pass, re-selecting negatives on the
//!   fly, and one optimizer update follows from the combined loss. V0 is the
//!   degenerate single-level cascade.
//!
//! Every optimizer update appends one CSV row per loss component to the
//! training log: `step,strategy,level,loss`, where `loss` is the batch mean
//! of that component.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::ndgrad::Node;
use crate::scorer::{score_block, ParamNodes, ScorerParams};
use crate::sir::block::{softmax_scores, ProbVector, SampleId, TrainingBlock};
use crate::sir::config::{CompressorSchedule, SelectionMode, SirConfig, StrategyKind};
use crate::sir::loss::{cascade_loss, contrastive_loss, cpr};
use crate::sir::optimizer::{adamw_step, OptimizerState};
use crate::sir::select::{compress_block, select_negatives};

/// The trained compressors of one run.
///
/// V1 and V2 produce one entry per level; the jointly trained strategies
/// produce a single shared parameter set. The last entry is the cascade's
/// final ranker.
#[derive(Debug)]
pub struct TrainOutcome {
    pub compressors: Vec<ScorerParams>,
    /// Optimizer updates actually performed.
    pub updates: u64,
}

impl TrainOutcome {
    /// The parameters used for final ranking: the last trained compressor.
    pub fn classifier(&self) -> &ScorerParams {
        self.compressors.last().expect("training produced no compressors")
    }
}

/// Write the training-log CSV header.
pub fn write_log_header(log: &mut dyn Write) -> Result<()> {
    writeln!(log, "step,strategy,level,loss").map_err(|e| Error::io("writing training log", e))
}

struct Budget {
    max: Option<u64>,
    used: u64,
}

impl Budget {
    fn new(max: Option<u64>) -> Self {
        Budget { max, used: 0 }
    }

    fn exhausted(&self) -> bool {
        self.max.is_some_and(|m| self.used >= m)
    }
}

/// Train one strategy over `blocks`, logging per-step losses to `log`.
pub fn run_strategy(
    config: &SirConfig,
    blocks: &[TrainingBlock],
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    config.validate()?;
    if blocks.is_empty() {
        return Err(Error::Config("no training blocks".into()));
    }
    match config.strategy {
        StrategyKind::V1 => train_phased(config, blocks, log, PhaseInit::FromBase),
        StrategyKind::V2 => train_phased(config, blocks, log, PhaseInit::FromPrevious),
        StrategyKind::V0 | StrategyKind::V3 | StrategyKind::V4 => {
            train_joint(config, blocks, log)
        }
    }
}

/// Score every block with `params` and keep only the `k` selected negatives.
/// This is the static compression step between V1/V2 phases; it is also the
/// lens used to inspect what a trained cascade chose to keep.
pub fn compress_dataset(
    params: &ScorerParams,
    blocks: &[TrainingBlock],
    k: usize,
    mode: SelectionMode,
    rng: &mut Pcg64,
) -> Result<Vec<TrainingBlock>> {
    let nodes = ParamNodes::constant(params);
    blocks
        .iter()
        .map(|block| {
            let scores = score_block(&nodes, block)?;
            ensure_finite_scores(&scores.values(), block, 0, 0)?;
            let selected = select_negatives(&scores, k, mode, rng)?;
            compress_block(block, &selected)
        })
        .collect()
}

enum PhaseInit {
    FromBase,
    FromPrevious,
}

fn train_phased(
    config: &SirConfig,
    blocks: &[TrainingBlock],
    log: &mut dyn Write,
    init: PhaseInit,
) -> Result<TrainOutcome> {
    let base = ScorerParams::init(&config.scorer)?;
    let mut selection_rng = Pcg64::seed_from_u64(config.schedule.rng_seed);
    let mut budget = Budget::new(config.max_updates);
    let levels = config.schedule.num_levels();
    let mut compressors: Vec<ScorerParams> = Vec::with_capacity(levels);
    let mut current_blocks = blocks.to_vec();

    for level in 1..=levels {
        let mut params = match (&init, compressors.last()) {
            (PhaseInit::FromPrevious, Some(prev)) => prev.clone(),
            _ => base.clone(),
        };
        train_phase(&mut params, &current_blocks, config, level, &mut budget, log)?;
        if level < levels {
            let k = config.schedule.k_per_level[level - 1];
            current_blocks = compress_dataset(
                &params,
                &current_blocks,
                k,
                config.schedule.selection_mode,
                &mut selection_rng,
            )?;
        }
        compressors.push(params);
    }
    Ok(TrainOutcome {
        compressors,
        updates: budget.used,
    })
}

/// One fine-tuning phase over a fixed set of blocks with the plain
/// contrastive loss.
fn train_phase(
    params: &mut ScorerParams,
    blocks: &[TrainingBlock],
    config: &SirConfig,
    level: usize,
    budget: &mut Budget,
    log: &mut dyn Write,
) -> Result<()> {
    let mut state = OptimizerState::new(params);
    'epochs: for _ in 0..config.epochs {
        for chunk in blocks.chunks(config.batch_blocks) {
            if budget.exhausted() {
                break 'epochs;
            }
            let nodes = ParamNodes::new(params);
            let mut block_losses = Vec::with_capacity(chunk.len());
            for block in chunk {
                let scores = score_block(&nodes, block)?;
                ensure_finite_scores(&scores.values(), block, level, budget.used + 1)?;
                block_losses.push(contrastive_loss(&softmax_scores(&scores))?);
            }
            let batch_loss = Node::stack(&block_losses).mean();
            let loss_value = batch_loss.item();
            check_finite_loss(loss_value, budget.used + 1)?;
            batch_loss.backward();
            adamw_step(params, &nodes.grads(), &mut state, &config.optimizer)?;
            budget.used += 1;
            writeln!(
                log,
                "{},{},{},{}",
                budget.used, config.strategy, level, loss_value
            )
            .map_err(|e| Error::io("writing training log", e))?;
        }
    }
    Ok(())
}

fn train_joint(
    config: &SirConfig,
    blocks: &[TrainingBlock],
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    let mut params = ScorerParams::init(&config.scorer)?;
    let mut state = OptimizerState::new(&params);
    let mut selection_rng = Pcg64::seed_from_u64(config.schedule.rng_seed);
    let mut budget = Budget::new(config.max_updates);
    let need_cpr = config.strategy == StrategyKind::V4;

    'epochs: for _ in 0..config.epochs {
        for chunk in blocks.chunks(config.batch_blocks) {
            if budget.exhausted() {
                break 'epochs;
            }
            let nodes = ParamNodes::new(&params);
            let mut totals = Vec::with_capacity(chunk.len());
            let mut component_sums: BTreeMap<usize, f64> = BTreeMap::new();
            for block in chunk {
                let (level_probs, cpr_probs) = cascade_forward(
                    &nodes,
                    block,
                    &config.schedule,
                    need_cpr,
                    &mut selection_rng,
                    budget.used + 1,
                )?;
                let loss = cascade_loss(config.strategy, &level_probs, &cpr_probs)?;
                for (lvl, node) in &loss.components {
                    *component_sums.entry(*lvl).or_insert(0.0) += node.item();
                }
                totals.push(loss.total);
            }
            let batch_loss = Node::stack(&totals).mean();
            check_finite_loss(batch_loss.item(), budget.used + 1)?;
            batch_loss.backward();
            adamw_step(&mut params, &nodes.grads(), &mut state, &config.optimizer)?;
            budget.used += 1;
            for (lvl, sum) in &component_sums {
                writeln!(
                    log,
                    "{},{},{},{}",
                    budget.used,
                    config.strategy,
                    lvl,
                    sum / chunk.len() as f64
                )
                .map_err(|e| Error::io("writing training log", e))?;
            }
        }
    }
    Ok(TrainOutcome {
        compressors: vec![params],
        updates: budget.used,
    })
}

/// Run the whole cascade for one block inside the current graph: score,
/// softmax, (optionally) CPR, select, compress, repeat. Returns the
/// per-level probability vectors and, when requested, the per-level CPR
/// vectors.
fn cascade_forward(
    nodes: &ParamNodes,
    block: &TrainingBlock,
    schedule: &CompressorSchedule,
    need_cpr: bool,
    rng: &mut Pcg64,
    step: u64,
) -> Result<(Vec<ProbVector>, Vec<ProbVector>)> {
    let levels = schedule.num_levels();
    let mut level_probs: Vec<ProbVector> = Vec::with_capacity(levels);
    let mut cpr_probs: Vec<ProbVector> = Vec::new();
    let mut current = block.clone();
    for level in 1..=levels {
        let scores = score_block(nodes, &current)?;
        ensure_finite_scores(&scores.values(), &current, level, step)?;
        level_probs.push(softmax_scores(&scores));
        if need_cpr {
            let surviving: Vec<SampleId> = level_probs[level - 1].ids().to_vec();
            cpr_probs.push(cpr(&level_probs, &surviving)?);
        }
        if level < levels {
            let k = schedule.k_per_level[level - 1];
            let selected = select_negatives(&scores, k, schedule.selection_mode, rng)?;
            current = compress_block(&current, &selected)?;
        }
    }
    Ok((level_probs, cpr_probs))
}

/// Diverged runs show up first as non-finite logits; catch them before the
/// loss graph would panic on a NaN log.
fn ensure_finite_scores(
    values: &[f64],
    block: &TrainingBlock,
    level: usize,
    step: u64,
) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            step,
            detail: format!(
                "non-finite logit for query '{}' at level {level}",
                block.query_id()
            ),
        })
    }
}

fn check_finite_loss(value: f64, step: u64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            step,
            detail: format!("batch loss is {value}"),
        })
    }
}
