//! Ranking-quality metrics: MRR@k, MAP@k, NDCG@k.
//!
//! All metrics use binary relevance from [`Qrels`]. A query that has no
//! relevant documents at all is excluded from aggregates and counted as
//! skipped in the report — a reciprocal rank is undefined without a relevant
//! document. Cutoffs are 1-based ranks: `k = 10` scores the first ten
//! entries of a ranking.
//!
//! NDCG normalizes against the ideal reordering of the ranking itself, so a
//! perfectly ordered candidate list always scores 1.0 and every metric is a
//! pure function of (ranking, relevant set, k).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::error::{Error, Result};
use crate::scorer::{score_pair, EncodedText, ParamNodes, ScorerParams};

/// Binary relevance judgments: query id → set of relevant doc ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    pub fn add(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>) {
        self.relevant
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into());
    }

    /// The relevant set for a query, if it has one.
    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(query_id).filter(|s| !s.is_empty())
    }

    pub fn num_queries(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.relevant.keys().map(String::as_str)
    }
}

/// Rank a query's candidates by scorer logit, descending; ties break by
/// doc id ascending. Returns `(doc_id, logit)` pairs in rank order.
pub fn rank_candidates(
    params: &ScorerParams,
    query: &EncodedText,
    candidates: &[(String, EncodedText)],
) -> Result<Vec<(String, f64)>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot rank an empty candidate list".into(),
        ));
    }
    let nodes = ParamNodes::constant(params);
    let mut scored: Vec<(String, f64)> = candidates
        .iter()
        .map(|(doc_id, text)| (doc_id.clone(), score_pair(&nodes, query, text).item()))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

// ----- per-query metric kernels -----

/// 1/rank of the first relevant doc within the top `k`, else 0.
pub fn reciprocal_rank_at_k(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|doc| relevant.contains(doc))
        .map_or(0.0, |idx| 1.0 / (idx + 1) as f64)
}

/// Mean precision over the relevant hits in the top `k`, normalized by
/// `min(|relevant|, k)`.
pub fn average_precision_at_k(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (idx, doc) in ranking.iter().take(k).enumerate() {
        if relevant.contains(doc) {
            hits += 1;
            precision_sum += hits as f64 / (idx + 1) as f64;
        }
    }
    let normalizer = relevant.len().min(k);
    if normalizer == 0 {
        0.0
    } else {
        precision_sum / normalizer as f64
    }
}

/// Binary-gain NDCG: `DCG = Σ_{r≤k} rel_r / log2(r+1)` over the ranking,
/// normalized by the DCG of the ranking's own ideal reordering. A ranking
/// containing no relevant doc scores 0.
pub fn ndcg_at_k_query(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, doc)| relevant.contains(*doc))
        .map(|(idx, _)| discount(idx + 1))
        .sum();
    let relevant_in_ranking = ranking.iter().filter(|doc| relevant.contains(*doc)).count();
    let ideal_hits = relevant_in_ranking.min(k);
    let idcg: f64 = (1..=ideal_hits).map(discount).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

// ----- aggregates over a run -----

/// An aggregate metric plus how many queries contributed to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

fn aggregate(
    run: &[(String, Vec<String>)],
    qrels: &Qrels,
    k: usize,
    per_query: impl Fn(&[String], &BTreeSet<String>, usize) -> f64,
) -> MetricValue {
    assert!(k >= 1, "metric cutoff must be at least 1");
    let mut sum = 0.0;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for (query_id, ranking) in run {
        match qrels.relevant(query_id) {
            Some(relevant) => {
                sum += per_query(ranking, relevant, k);
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    MetricValue {
        value: if evaluated == 0 { 0.0 } else { sum / evaluated as f64 },
        evaluated,
        skipped,
    }
}

pub fn mrr_at_k(run: &[(String, Vec<String>)], qrels: &Qrels, k: usize) -> MetricValue {
    aggregate(run, qrels, k, reciprocal_rank_at_k)
}

pub fn map_at_k(run: &[(String, Vec<String>)], qrels: &Qrels, k: usize) -> MetricValue {
    aggregate(run, qrels, k, average_precision_at_k)
}

pub fn ndcg_at_k(run: &[(String, Vec<String>)], qrels: &Qrels, k: usize) -> MetricValue {
    aggregate(run, qrels, k, ndcg_at_k_query)
}

// ----- reports -----

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub cutoff: usize,
    pub value: MetricValue,
}

/// Aggregate metrics at the configured cutoffs over one ranked run.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRunReport {
    pub rows: Vec<ReportRow>,
}

/// Compute a report over a run that still carries scores (as produced by
/// [`rank_candidates`]).
pub fn build_report(
    run: &[(String, Vec<(String, f64)>)],
    qrels: &Qrels,
    mrr_cutoffs: &[usize],
    map_cutoffs: &[usize],
    ndcg_cutoffs: &[usize],
) -> RankedRunReport {
    let id_run: Vec<(String, Vec<String>)> = run
        .iter()
        .map(|(qid, ranked)| {
            (
                qid.clone(),
                ranked.iter().map(|(doc_id, _)| doc_id.clone()).collect(),
            )
        })
        .collect();
    let mut rows = Vec::new();
    for &k in mrr_cutoffs {
        rows.push(ReportRow {
            metric: "mrr".into(),
            cutoff: k,
            value: mrr_at_k(&id_run, qrels, k),
        });
    }
    for &k in map_cutoffs {
        rows.push(ReportRow {
            metric: "map".into(),
            cutoff: k,
            value: map_at_k(&id_run, qrels, k),
        });
    }
    for &k in ndcg_cutoffs {
        rows.push(ReportRow {
            metric: "ndcg".into(),
            cutoff: k,
            value: ndcg_at_k(&id_run, qrels, k),
        });
    }
    RankedRunReport { rows }
}

impl RankedRunReport {
    /// Fixed-format CSV: `metric,cutoff,value,queries_evaluated,queries_skipped`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,cutoff,value,queries_evaluated,queries_skipped\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{},{}\n",
                row.metric, row.cutoff, row.value.value, row.value.evaluated, row.value.skipped
            ));
        }
        out
    }

    /// The aggregate value for one metric/cutoff pair, if present.
    pub fn value(&self, metric: &str, cutoff: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.cutoff == cutoff)
            .map(|r| r.value.value)
    }
}

/// Write a run in TREC format: `qid Q0 did rank score tag`.
pub fn write_trec_run(
    run: &[(String, Vec<(String, f64)>)],
    tag: &str,
    out: &mut dyn Write,
) -> Result<()> {
    for (query_id, ranked) in run {
        for (rank, (doc_id, score)) in ranked.iter().enumerate() {
            writeln!(out, "{query_id} Q0 {doc_id} {} {score} {tag}", rank + 1)
                .map_err(|e| Error::io("writing TREC run file", e))?;
        }
    }
    Ok(())
}
