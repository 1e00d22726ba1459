//! Synthetic retrieval corpus with planted negative difficulty.
//!
//! Every query is a random sequence of distinct vocabulary tokens. Its
//! positive document copies a large fraction of the query's tokens; each
//! negative copies the smaller fraction scheduled for its difficulty level
//! and fills the rest with tokens that never occur in the query. Token
//! overlap with the query is therefore *exactly* the scheduled count by
//! construction, strictly increasing with difficulty, which makes the
//! planted difficulty a ground-truth hardness signal for curriculum checks.
//!
//! Difficulty levels are assigned round-robin over each query's negatives,
//! so every level is represented as evenly as possible in every block.

use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::data::ingest::{CandidateTable, CorpusDoc, CorpusTable, QrelsRow, QrelsTable, QueryTable};
use crate::error::{Error, Result};
use crate::metrics::Qrels;
use crate::scorer::encode;
use crate::sir::{Sample, SampleId, TrainingBlock};

fn default_query_len() -> usize {
    20
}

/// Parameters of one synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_queries: usize,
    pub negatives_per_query: usize,
    pub vocab_size: usize,
    /// Fraction of query tokens copied into a negative at each difficulty
    /// level, lowest difficulty first. The number of levels is this
    /// vector's length.
    pub overlap_per_level: Vec<f64>,
    /// Fraction of query tokens copied into the positive document. Must
    /// exceed every negative level's overlap.
    pub positive_overlap: f64,
    /// Tokens per query (documents have the same length).
    #[serde(default = "default_query_len")]
    pub query_len: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn difficulty_levels(&self) -> usize {
        self.overlap_per_level.len()
    }

    /// Exact per-level token-copy counts implied by the overlap schedule,
    /// negatives first, positive last.
    fn copy_counts(&self) -> (Vec<usize>, usize) {
        let count = |frac: f64| (frac * self.query_len as f64).round() as usize;
        (
            self.overlap_per_level.iter().map(|&f| count(f)).collect(),
            count(self.positive_overlap),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_queries == 0 {
            return Err(Error::Config("num_queries must be at least 1".into()));
        }
        if self.negatives_per_query == 0 {
            return Err(Error::Config("negatives_per_query must be at least 1".into()));
        }
        if self.query_len == 0 {
            return Err(Error::Config("query_len must be at least 1".into()));
        }
        if self.overlap_per_level.is_empty() {
            return Err(Error::Config("overlap_per_level must not be empty".into()));
        }
        for &f in &self.overlap_per_level {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!(
                    "overlap fractions must lie in [0, 1], got {f}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.positive_overlap) {
            return Err(Error::Config(format!(
                "positive_overlap must lie in [0, 1], got {}",
                self.positive_overlap
            )));
        }
        // Documents are query_len tokens; fillers must come from outside the
        // query's tokens, so the vocabulary needs room for both.
        if self.vocab_size < 2 * self.query_len {
            return Err(Error::Config(format!(
                "vocab_size {} is too small for query_len {} (need at least twice)",
                self.vocab_size, self.query_len
            )));
        }
        let (neg_counts, pos_count) = self.copy_counts();
        if pos_count == 0 {
            return Err(Error::Config(format!(
                "infeasible overlap schedule: positive_overlap {} copies zero of {} query tokens",
                self.positive_overlap, self.query_len
            )));
        }
        let mut all = neg_counts.clone();
        all.push(pos_count);
        if all.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "infeasible overlap schedule: token-copy counts {:?} (positive {}) must be \
                 strictly increasing at query_len {}",
                neg_counts, pos_count, self.query_len
            )));
        }
        Ok(())
    }
}

/// Everything one synthetic corpus provides: the four ingestion tables plus
/// ready-made training blocks carrying planted difficulties.
pub struct SyntheticData {
    pub queries: QueryTable,
    pub corpus: CorpusTable,
    pub candidates: CandidateTable,
    pub qrels_table: QrelsTable,
    pub qrels: Qrels,
    pub blocks: Vec<TrainingBlock>,
}

/// Generate a corpus. `vocab_buckets` is the scorer's hashing width, needed
/// to pre-encode the training blocks; the tables keep raw text.
pub fn generate_synthetic(spec: &SyntheticSpec, vocab_buckets: usize) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = Pcg64::seed_from_u64(spec.seed);
    let (neg_counts, pos_count) = spec.copy_counts();
    let levels = spec.difficulty_levels();

    let mut queries = Vec::with_capacity(spec.num_queries);
    let mut corpus = Vec::new();
    let mut candidates = Vec::with_capacity(spec.num_queries);
    let mut qrels_rows = Vec::with_capacity(spec.num_queries);
    let mut blocks = Vec::with_capacity(spec.num_queries);

    for qi in 0..spec.num_queries {
        let query_id = format!("q{qi}");
        let query_tokens = draw_distinct(&mut rng, spec.vocab_size, spec.query_len, &[]);
        let query_text = to_text(&query_tokens);

        let positive_id = format!("q{qi}-pos");
        let positive_text =
            make_doc(&mut rng, &query_tokens, pos_count, spec.vocab_size, spec.query_len);

        let mut doc_ids = vec![positive_id.clone()];
        corpus.push(CorpusDoc {
            doc_id: positive_id.clone(),
            url: String::new(),
            title: String::new(),
            body: positive_text.clone(),
        });

        let mut samples = vec![Sample::positive(
            SampleId(0),
            positive_id.clone(),
            encode(&positive_text, vocab_buckets),
        )];
        for j in 0..spec.negatives_per_query {
            let level = j % levels;
            let doc_id = format!("q{qi}-neg{j}");
            let text = make_doc(
                &mut rng,
                &query_tokens,
                neg_counts[level],
                spec.vocab_size,
                spec.query_len,
            );
            corpus.push(CorpusDoc {
                doc_id: doc_id.clone(),
                url: String::new(),
                title: String::new(),
                body: text.clone(),
            });
            samples.push(Sample::negative(
                SampleId(j as u32 + 1),
                doc_id.clone(),
                encode(&text, vocab_buckets),
                Some(level as u32),
            ));
            doc_ids.push(doc_id);
        }

        // Candidates are the query's documents in a seeded shuffle, so the
        // positive does not always sit at rank 1.
        shuffle(&mut rng, &mut doc_ids);
        let ranked: Vec<(String, u32)> = doc_ids
            .into_iter()
            .enumerate()
            .map(|(rank, doc_id)| (doc_id, rank as u32 + 1))
            .collect();
        candidates.push((query_id.clone(), ranked));

        qrels_rows.push(QrelsRow {
            query_id: query_id.clone(),
            iteration: "0".to_string(),
            doc_id: positive_id,
            relevance: 1,
        });
        blocks.push(TrainingBlock::new(
            query_id.clone(),
            encode(&query_text, vocab_buckets),
            samples,
        )?);
        queries.push((query_id, query_text));
    }

    let qrels_table = QrelsTable::from_rows(qrels_rows)?;
    let qrels = qrels_table.to_qrels();
    Ok(SyntheticData {
        queries: QueryTable::from_rows(queries)?,
        corpus: CorpusTable::from_rows(corpus)?,
        candidates: CandidateTable::from_rows(candidates)?,
        qrels_table,
        qrels,
        blocks,
    })
}

fn to_text(tokens: &[usize]) -> String {
    tokens
        .iter()
        .map(|t| format!("t{t}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Draw `n` distinct values from `0..vocab`, excluding `exclude`, in draw
/// order. Rejection sampling is fine here: `validate` guarantees the pool
/// left after exclusions is at least as large as the draw.
fn draw_distinct(rng: &mut Pcg64, vocab: usize, n: usize, exclude: &[usize]) -> Vec<usize> {
    let mut taken = vec![false; vocab];
    for &e in exclude {
        taken[e] = true;
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t = rng.random_range(0..vocab);
        if !taken[t] {
            taken[t] = true;
            out.push(t);
        }
    }
    out
}

/// A document of `doc_len` tokens: `copy_count` tokens copied from the query
/// (at seeded distinct positions) plus fillers disjoint from the query.
fn make_doc(
    rng: &mut Pcg64,
    query_tokens: &[usize],
    copy_count: usize,
    vocab: usize,
    doc_len: usize,
) -> String {
    let mut positions: Vec<usize> = (0..query_tokens.len()).collect();
    shuffle(rng, &mut positions);
    let mut copied: Vec<usize> = positions[..copy_count].to_vec();
    copied.sort_unstable();
    let mut tokens: Vec<usize> = copied.into_iter().map(|p| query_tokens[p]).collect();
    let fillers = draw_distinct(rng, vocab, doc_len - copy_count, query_tokens);
    tokens.extend(fillers);
    to_text(&tokens)
}

/// Seeded Fisher-Yates shuffle.
fn shuffle<T>(rng: &mut Pcg64, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
