//! The self-involvement ranker: blocks, selection, losses, and training.
//!
//! A cascade of compressors trains on progressively smaller blocks. Each
//! level scores its block, a selection step keeps the highest-scoring
//! ("hardest") negatives, and the next level trains on what survived. The
//! five strategies in [`StrategyKind`] differ in how parameters are shared
//! across levels and which levels contribute to the loss; see [`train`] for
//! the two loop shapes and [`loss`] for the contrastive and CPR losses.

pub mod block;
pub mod config;
pub mod loss;
pub mod optimizer;
pub mod select;
pub mod train;

pub use block::{softmax_scores, Label, ProbVector, Sample, SampleId, ScoreVector, TrainingBlock};
pub use config::{CompressorSchedule, SelectionMode, SirConfig, StrategyKind};
pub use loss::{cascade_loss, contrastive_loss, cpr, v4_level_loss, CascadeLoss, PROB_EPS};
pub use optimizer::{adamw_step, OptimizerHyper, OptimizerState};
pub use select::{compress_block, select_negatives, top_k_by_score};
pub use train::{compress_dataset, run_strategy, write_log_header, TrainOutcome};
