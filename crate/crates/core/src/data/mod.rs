//! Datasets: synthetic generation, file ingestion, block assembly, and
//! checkpoint persistence.
//!
//! The on-disk text formats live in [`ingest`]; [`synthetic`] builds
//! fully-specified corpora with planted difficulty levels; [`assemble`]
//! turns ingested tables into training blocks; [`checkpoint`] is the binary
//! container for trained scorer parameters.

pub mod assemble;
pub mod checkpoint;
pub mod ingest;
pub mod synthetic;

pub use assemble::{assemble_blocks, AssemblyStats};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use ingest::{
    load_candidates, load_corpus, load_qrels, load_queries, write_candidates, write_corpus,
    write_qrels, write_queries, CandidateTable, CorpusDoc, CorpusTable, QrelsRow, QrelsTable,
    QueryTable,
};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
