//! Self-involvement ranker: a desk-scale learning-to-rank training framework.
//!
//! The crate trains a cascade of "compressor" rankers. Each compressor scores
//! a block of one positive and many negative documents for a query, and the
//! highest-scoring negatives — the ones the current model finds hardest — are
//! kept as the training set for the next level. Because every level re-scores
//! the samples it was itself trained on, the cascade builds its own
//! curriculum out of its own mistakes.
//!
//! Modules:
//!
//! * [`ndgrad`] — minimal reverse-mode autodiff over dense `f64` tensors.
//! * [`scorer`] — a hashing-trick text encoder and a small MLP relevance
//!   scorer expressed as `ndgrad` graphs.
//! * [`sir`] — training blocks, negative selection, the contrastive loss,
//!   cascade fine-tuning strategies V0–V4, and the AdamW optimizer.
//! * [`metrics`] — MRR@k, MAP@k and NDCG@k over ranked runs.
//! * [`data`] — synthetic corpus generation, TSV/qrels ingestion, block
//!   assembly, and checkpoint persistence.
//!
//! All randomness is drawn from seeded PCG-64 streams and every container
//! with observable iteration order is deterministic, so identical configs
//! produce bit-identical checkpoints and reports.

pub mod data;
pub mod error;
pub mod metrics;
pub mod ndgrad;
pub mod scorer;
pub mod sir;

pub use error::{Error, Result};
pub use ndgrad::{Node, Tensor};
pub use scorer::{EncodedText, ParamNodes, ScorerHyper, ScorerParams};
pub use sir::{
    CompressorSchedule, OptimizerHyper, ProbVector, Sample, SampleId, ScoreVector, SelectionMode,
    SirConfig, StrategyKind, TrainingBlock,
};
