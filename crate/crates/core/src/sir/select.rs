//! Negative selection: the compression step between cascade levels.
//!
//! Selection happens outside the autodiff graph. A compressor's logits are
//! read out as plain numbers, the surviving negatives are chosen, and the
//! next level scores a physically smaller block; no gradient flows through
//! the choice itself.

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::sir::block::{SampleId, ScoreVector, TrainingBlock};
use crate::sir::config::SelectionMode;

/// Ids of the `k` highest-valued entries, in descending value order. Ties
/// are broken toward the earlier position, so equal scores keep their
/// original relative order.
pub fn top_k_by_score(ids: &[SampleId], values: &[f64], k: usize) -> Vec<SampleId> {
    assert_eq!(ids.len(), values.len(), "ids and values lengths differ");
    assert!(k <= ids.len(), "k {} exceeds {} entries", k, ids.len());
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.into_iter().map(|i| ids[i]).collect()
}

/// Choose `k` negatives from a scored block (the positive at index 0 is
/// never a candidate).
///
/// `TopK` keeps the highest-logit negatives — the ones the current model
/// most confuses with the positive — in descending logit order. `Random`
/// draws `k` negatives without replacement from `rng`, in draw order.
pub fn select_negatives(
    scores: &ScoreVector,
    k: usize,
    mode: SelectionMode,
    rng: &mut impl Rng,
) -> Result<Vec<SampleId>> {
    let n = scores.len().saturating_sub(1);
    if k == 0 {
        return Err(Error::InvalidArgument(
            "cannot select zero negatives".into(),
        ));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} negatives from a block with {n}"
        )));
    }
    let neg_ids = &scores.ids()[1..];
    match mode {
        SelectionMode::TopK => {
            let values = scores.values();
            Ok(top_k_by_score(neg_ids, &values[1..], k))
        }
        SelectionMode::Random => {
            let mut pool: Vec<SampleId> = neg_ids.to_vec();
            for i in 0..k {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            pool.truncate(k);
            Ok(pool)
        }
    }
}

/// Rebuild a block keeping only the selected negatives, in the order given.
/// The positive stays at index 0 and every sample keeps its identity and
/// planted difficulty.
pub fn compress_block(block: &TrainingBlock, selected: &[SampleId]) -> Result<TrainingBlock> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "cannot compress block for query '{}' to zero negatives",
            block.query_id()
        )));
    }
    let mut samples = Vec::with_capacity(selected.len() + 1);
    samples.push(block.positive().clone());
    for &id in selected {
        if id == block.positive().sample_id {
            return Err(Error::InvalidArgument(format!(
                "selection for query '{}' includes the positive sample",
                block.query_id()
            )));
        }
        let sample = block
            .negatives()
            .iter()
            .find(|s| s.sample_id == id)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "selection for query '{}' names sample id {} which is not in the block",
                    block.query_id(),
                    id.0
                ))
            })?;
        samples.push(sample.clone());
    }
    TrainingBlock::new(block.query_id().to_string(), block.query().clone(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndgrad::{Node, Tensor};
    use crate::scorer::encode;
    use crate::sir::block::Sample;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn ids(ns: &[u32]) -> Vec<SampleId> {
        ns.iter().map(|&n| SampleId(n)).collect()
    }

    fn scored(values: Vec<f64>) -> ScoreVector {
        let n = values.len() as u32;
        ScoreVector::new(
            (0..n).map(SampleId).collect(),
            Node::constant(Tensor::from_vec(values)),
        )
        .unwrap()
    }

    #[test]
    fn top_k_returns_descending_order() {
        let sel = top_k_by_score(&ids(&[1, 2, 3, 4]), &[0.1, 0.9, 0.5, 0.7], 3);
        assert_eq!(sel, ids(&[2, 4, 3]));
    }

    #[test]
    fn top_k_breaks_ties_toward_earlier_position() {
        let sel = top_k_by_score(&ids(&[1, 2, 3, 4]), &[0.5, 0.9, 0.5, 0.5], 3);
        assert_eq!(sel, ids(&[2, 1, 3]));
    }

    #[test]
    fn select_top_k_skips_positive_even_if_it_scores_highest() {
        let sv = scored(vec![9.0, 0.3, 0.8, 0.1]);
        let mut rng = Pcg64::seed_from_u64(0);
        let sel = select_negatives(&sv, 2, SelectionMode::TopK, &mut rng).unwrap();
        assert_eq!(sel, ids(&[2, 1]));
    }

    #[test]
    fn select_rejects_k_zero_and_k_too_large() {
        let sv = scored(vec![1.0, 0.5, 0.2]);
        let mut rng = Pcg64::seed_from_u64(0);
        assert!(select_negatives(&sv, 0, SelectionMode::TopK, &mut rng).is_err());
        assert!(select_negatives(&sv, 3, SelectionMode::TopK, &mut rng).is_err());
        assert!(select_negatives(&sv, 2, SelectionMode::TopK, &mut rng).is_ok());
    }

    #[test]
    fn random_selection_is_seeded_and_without_replacement() {
        let sv = scored(vec![1.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let mut rng1 = Pcg64::seed_from_u64(42);
        let mut rng2 = Pcg64::seed_from_u64(42);
        let a = select_negatives(&sv, 3, SelectionMode::Random, &mut rng1).unwrap();
        let b = select_negatives(&sv, 3, SelectionMode::Random, &mut rng2).unwrap();
        assert_eq!(a, b);
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 3);
        assert!(!a.contains(&SampleId(0)));
    }

    #[test]
    fn random_selection_covers_all_negatives_across_seeds() {
        let sv = scored(vec![1.0, 0.1, 0.2, 0.3, 0.4]);
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let mut rng = Pcg64::seed_from_u64(seed);
            for id in select_negatives(&sv, 2, SelectionMode::Random, &mut rng).unwrap() {
                seen.insert(id);
            }
        }
        assert_eq!(seen.len(), 4);
    }

    fn block() -> TrainingBlock {
        let enc = |s: &str| encode(s, 64);
        TrainingBlock::new(
            "q".into(),
            enc("query"),
            vec![
                Sample::positive(SampleId(0), "p", enc("pos")),
                Sample::negative(SampleId(1), "n1", enc("n1"), Some(0)),
                Sample::negative(SampleId(2), "n2", enc("n2"), Some(1)),
                Sample::negative(SampleId(3), "n3", enc("n3"), Some(2)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn compress_block_keeps_identity_and_order() {
        let b = block();
        let c = compress_block(&b, &ids(&[3, 1])).unwrap();
        assert_eq!(c.num_negatives(), 2);
        assert_eq!(c.positive().sample_id, SampleId(0));
        assert_eq!(c.negatives()[0].sample_id, SampleId(3));
        assert_eq!(c.negatives()[0].planted_difficulty, Some(2));
        assert_eq!(c.negatives()[1].sample_id, SampleId(1));
    }

    #[test]
    fn compress_block_rejects_unknown_and_positive_ids() {
        let b = block();
        assert!(compress_block(&b, &ids(&[7])).is_err());
        assert!(compress_block(&b, &ids(&[0])).is_err());
        assert!(compress_block(&b, &[]).is_err());
    }
}
