//! Resolving a [`DataConfig`](crate::config::DataConfig) into training
//! blocks and an eval split, and producing ranked runs for evaluation.

use std::path::Path;

use sir_core::data::{
    assemble_blocks, generate_synthetic, load_candidates, load_corpus, load_qrels, load_queries,
    write_candidates, write_corpus, write_qrels, write_queries, CandidateTable, CorpusTable,
    QrelsTable, QueryTable, SyntheticData, SyntheticSpec,
};
use sir_core::metrics::{rank_candidates, Qrels};
use sir_core::scorer::encode;
use sir_core::{Error, Result, ScorerParams, TrainingBlock};

use crate::config::{DataConfig, FilesDataConfig, RunConfig};

/// Everything evaluation needs: queries with candidate lists, the corpus
/// holding their text, and the relevance judgments.
pub struct EvalData {
    pub queries: QueryTable,
    pub corpus: CorpusTable,
    pub candidates: CandidateTable,
    pub qrels: Qrels,
}

/// The eval spec used when the config does not give one: the train spec
/// regenerated under the next seed, so the split is disjoint but
/// identically distributed.
pub fn derived_eval_spec(train: &SyntheticSpec) -> SyntheticSpec {
    let mut spec = train.clone();
    spec.seed = train.seed + 1;
    spec
}

fn load_files_tables(
    f: &FilesDataConfig,
) -> Result<(QueryTable, CorpusTable, CandidateTable, Qrels)> {
    let queries = load_queries(&f.queries)?;
    let corpus = load_corpus(&f.corpus)?;
    let candidates = load_candidates(&f.candidates)?;
    let qrels = load_qrels(&f.qrels)?.to_qrels();
    Ok((queries, corpus, candidates, qrels))
}

/// Build the training blocks for `cfg`, reporting how many file-based
/// queries were skipped (synthetic data never skips).
pub fn train_blocks(cfg: &RunConfig) -> Result<(Vec<TrainingBlock>, String)> {
    match &cfg.data {
        DataConfig::Synthetic(s) => {
            let data = generate_synthetic(&s.train, cfg.scorer.vocab_buckets)?;
            let note = format!("{} synthetic training blocks", data.blocks.len());
            Ok((data.blocks, note))
        }
        DataConfig::Files(f) => {
            let (queries, corpus, candidates, qrels) = load_files_tables(f)?;
            let (blocks, stats) = assemble_blocks(
                &queries,
                &corpus,
                &candidates,
                &qrels,
                f.negatives_per_query,
                f.assembly_seed,
                cfg.scorer.vocab_buckets,
            )?;
            let note = format!(
                "{} blocks assembled, {} queries without a relevant candidate, \
                 {} with too few negatives",
                stats.assembled, stats.skipped_no_relevant, stats.skipped_insufficient_negatives
            );
            Ok((blocks, note))
        }
    }
}

/// Build the eval split for `cfg`.
pub fn eval_data(cfg: &RunConfig) -> Result<EvalData> {
    match &cfg.data {
        DataConfig::Synthetic(s) => {
            let spec = s.eval.clone().unwrap_or_else(|| derived_eval_spec(&s.train));
            let data = generate_synthetic(&spec, cfg.scorer.vocab_buckets)?;
            Ok(EvalData {
                queries: data.queries,
                corpus: data.corpus,
                candidates: data.candidates,
                qrels: data.qrels,
            })
        }
        DataConfig::Files(f) => {
            let queries = match &f.eval_queries {
                Some(path) => load_queries(path)?,
                None => load_queries(&f.queries)?,
            };
            let candidates = match &f.eval_candidates {
                Some(path) => load_candidates(path)?,
                None => load_candidates(&f.candidates)?,
            };
            let qrels = match &f.eval_qrels {
                Some(path) => load_qrels(path)?.to_qrels(),
                None => load_qrels(&f.qrels)?.to_qrels(),
            };
            Ok(EvalData {
                queries,
                corpus: load_corpus(&f.corpus)?,
                candidates,
                qrels,
            })
        }
    }
}

/// Rank every eval query's candidates with `params`, in query-table order.
/// Queries without a candidate list are dropped from the run (they carry no
/// ranking to score); candidates missing from the corpus are an error.
pub fn ranked_run(
    params: &ScorerParams,
    eval: &EvalData,
) -> Result<Vec<(String, Vec<(String, f64)>)>> {
    let buckets = params.hyper.vocab_buckets;
    let mut run = Vec::new();
    for (query_id, query_text) in eval.queries.rows() {
        let Some(candidates) = eval.candidates.get(query_id) else {
            continue;
        };
        let docs: Vec<(String, sir_core::EncodedText)> = candidates
            .iter()
            .map(|(doc_id, _)| {
                let doc = eval.corpus.get(doc_id).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "candidate doc '{doc_id}' for query '{query_id}' is missing from the corpus"
                    ))
                })?;
                Ok((doc_id.clone(), encode(&doc.text(), buckets)))
            })
            .collect::<Result<_>>()?;
        let ranked = rank_candidates(params, &encode(query_text, buckets), &docs)?;
        run.push((query_id.clone(), ranked));
    }
    Ok(run)
}

/// Write one synthetic split's tables into `dir` with the given filename
/// prefix (`""` or `"eval."`).
pub fn write_split(dir: &Path, prefix: &str, data: &SyntheticData) -> Result<()> {
    write_queries(&data.queries, &dir.join(format!("{prefix}queries.tsv")))?;
    write_corpus(&data.corpus, &dir.join(format!("{prefix}corpus.tsv")))?;
    write_candidates(&data.candidates, &dir.join(format!("{prefix}candidates.tsv")))?;
    write_qrels(&data.qrels_table, &dir.join(format!("{prefix}qrels.txt")))?;
    Ok(())
}

/// Rebuild a split's tables with `prefix` prepended to every query and doc
/// id. Generated eval splits get this so their ids never collide with the
/// train split's, letting the two corpus files be concatenated into the one
/// shared corpus a files-based config expects. (Blocks are dropped: a
/// written split is re-assembled from its files when trained on.)
pub fn prefix_split_ids(data: &SyntheticData, prefix: &str) -> Result<SyntheticData> {
    let queries = QueryTable::from_rows(
        data.queries
            .rows()
            .iter()
            .map(|(qid, text)| (format!("{prefix}{qid}"), text.clone()))
            .collect(),
    )?;
    let corpus = CorpusTable::from_rows(
        data.corpus
            .rows()
            .iter()
            .map(|doc| {
                let mut doc = doc.clone();
                doc.doc_id = format!("{prefix}{}", doc.doc_id);
                doc
            })
            .collect(),
    )?;
    let candidates = CandidateTable::from_rows(
        data.candidates
            .rows()
            .iter()
            .map(|(qid, cands)| {
                (
                    format!("{prefix}{qid}"),
                    cands
                        .iter()
                        .map(|(did, rank)| (format!("{prefix}{did}"), *rank))
                        .collect(),
                )
            })
            .collect(),
    )?;
    let qrels_table = QrelsTable::from_rows(
        data.qrels_table
            .rows()
            .iter()
            .map(|row| {
                let mut row = row.clone();
                row.query_id = format!("{prefix}{}", row.query_id);
                row.doc_id = format!("{prefix}{}", row.doc_id);
                row
            })
            .collect(),
    )?;
    let qrels = qrels_table.to_qrels();
    Ok(SyntheticData {
        queries,
        corpus,
        candidates,
        qrels_table,
        qrels,
        blocks: Vec::new(),
    })
}
