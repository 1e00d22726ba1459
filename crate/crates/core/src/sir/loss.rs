//! Contrastive loss and compressed probability re-ranking (CPR).
//!
//! The per-block loss pushes the positive's softmax probability toward one
//! and every surviving negative's toward zero:
//!
//! ```text
//! L = -log P(positive) - sum_j log(1 - P(negative_j))
//! ```
//!
//! Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any log so
//! a saturated softmax cannot produce an infinite loss.
//!
//! CPR combines a cascade's opinion of the samples that survived to level
//! `i`: every earlier level's probabilities are gathered *by sample
//! identity* for the surviving ids, multiplied element-wise, and
//! re-normalized with a softmax. Gathering by identity matters because each
//! level physically reorders its block — position j at level 3 is not the
//! sample that sat at position j at level 1.

use crate::error::{Error, Result};
use crate::ndgrad::Node;
use crate::sir::block::{ProbVector, SampleId};
use crate::sir::config::StrategyKind;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-12;

/// The per-block contrastive loss over a probability vector whose first
/// entry is the positive. Needs at least one negative.
pub fn contrastive_loss(probs: &ProbVector) -> Result<Node> {
    let n = probs.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "contrastive loss needs a positive and at least one negative, got {n} entries"
        )));
    }
    let p = probs.probs().clamp(PROB_EPS, 1.0 - PROB_EPS);
    let positive_term = p.select(&[0]).log().sum();
    let negative_indices: Vec<usize> = (1..n).collect();
    let negative_term = p
        .select(&negative_indices)
        .neg()
        .add_scalar(1.0)
        .log()
        .sum();
    Ok(positive_term.add(&negative_term).neg())
}

/// Compressed probability re-ranking for the samples in `surviving_ids`,
/// given the probability vectors of every level seen so far (level 1 first,
/// current level last).
///
/// Each history level must contain every surviving id; the result keeps the
/// order of `surviving_ids` and is differentiable back into every level.
pub fn cpr(history: &[ProbVector], surviving_ids: &[SampleId]) -> Result<ProbVector> {
    if history.is_empty() {
        return Err(Error::InvalidArgument(
            "CPR needs at least one level of probabilities".into(),
        ));
    }
    if surviving_ids.is_empty() {
        return Err(Error::InvalidArgument(
            "CPR over an empty set of surviving samples".into(),
        ));
    }
    let mut product: Option<Node> = None;
    for (level_index, level) in history.iter().enumerate() {
        let mut positions = Vec::with_capacity(surviving_ids.len());
        for &id in surviving_ids {
            let pos = level.position_of(id).ok_or_else(|| {
                Error::Internal(format!(
                    "sample id {} survives to the current level but is missing from \
                     level {} probabilities",
                    id.0,
                    level_index + 1
                ))
            })?;
            positions.push(pos);
        }
        let gathered = level.probs().select(&positions);
        product = Some(match product {
            None => gathered,
            Some(acc) => acc.mul(&gathered),
        });
    }
    ProbVector::new(surviving_ids.to_vec(), product.unwrap().softmax())
}

/// The level loss used by strategy V4: the contrastive loss evaluated over a
/// CPR vector instead of a single level's probabilities.
pub fn v4_level_loss(cpr_probs: &ProbVector) -> Result<Node> {
    contrastive_loss(cpr_probs)
}

/// One strategy's loss, split into its per-level components.
pub struct CascadeLoss {
    /// `(level, loss)` pairs, levels 1-based, in ascending level order.
    pub components: Vec<(usize, Node)>,
    /// Sum of all components; the node actually backpropagated.
    pub total: Node,
}

/// Assemble the loss components of a jointly trained strategy from one
/// block's cascade forward pass.
///
/// `level_probs` holds the per-level softmax vectors (level 1 first);
/// `cpr_probs` holds the per-level CPR vectors and is only consulted for V4.
/// V1 and V2 train one level at a time and never call this.
pub fn cascade_loss(
    strategy: StrategyKind,
    level_probs: &[ProbVector],
    cpr_probs: &[ProbVector],
) -> Result<CascadeLoss> {
    let m = level_probs.len();
    let components: Vec<(usize, Node)> = match strategy {
        StrategyKind::V0 => {
            if m != 1 {
                return Err(Error::Internal(format!(
                    "strategy V0 trains a single level, got {m}"
                )));
            }
            vec![(1, contrastive_loss(&level_probs[0])?)]
        }
        StrategyKind::V1 | StrategyKind::V2 => {
            return Err(Error::Internal(
                "strategies V1 and V2 train per level, not over a joint cascade".into(),
            ));
        }
        StrategyKind::V3 => {
            if m < 2 {
                return Err(Error::Internal(format!(
                    "strategy V3 needs at least two levels, got {m}"
                )));
            }
            vec![
                (1, contrastive_loss(&level_probs[0])?),
                (m, contrastive_loss(&level_probs[m - 1])?),
            ]
        }
        StrategyKind::V4 => {
            if cpr_probs.len() != m {
                return Err(Error::Internal(format!(
                    "strategy V4 needs one CPR vector per level: {} vs {m}",
                    cpr_probs.len()
                )));
            }
            cpr_probs
                .iter()
                .enumerate()
                .map(|(i, cp)| Ok((i + 1, v4_level_loss(cp)?)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let total = components
        .iter()
        .map(|(_, node)| node.clone())
        .reduce(|acc, node| acc.add(&node))
        .expect("cascade loss has at least one component");
    Ok(CascadeLoss { components, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndgrad::{Node, Tensor};

    fn pv(ids: &[u32], probs: Vec<f64>) -> ProbVector {
        ProbVector::new(
            ids.iter().map(|&i| SampleId(i)).collect(),
            Node::constant(Tensor::from_vec(probs)),
        )
        .unwrap()
    }

    fn pv_leaf(ids: &[u32], probs: Vec<f64>) -> (ProbVector, Node) {
        let node = Node::leaf(Tensor::from_vec(probs));
        let vector = ProbVector::new(
            ids.iter().map(|&i| SampleId(i)).collect(),
            node.clone(),
        )
        .unwrap();
        (vector, node)
    }

    #[test]
    fn contrastive_loss_matches_hand_computation() {
        let probs = vec![0.7, 0.2, 0.1];
        let expected = -(0.7f64.ln()) - (1.0 - 0.2f64).ln() - (1.0 - 0.1f64).ln();
        let loss = contrastive_loss(&pv(&[0, 1, 2], probs)).unwrap();
        assert!((loss.item() - expected).abs() < 1e-12);
    }

    #[test]
    fn contrastive_loss_uniform_closed_form() {
        // With P uniform over 1 positive and N negatives:
        // L = ln(1+N) - N ln(N / (N+1)).
        for n in [1usize, 3, 7, 87] {
            let p = 1.0 / (n as f64 + 1.0);
            let probs = vec![p; n + 1];
            let ids: Vec<u32> = (0..=n as u32).collect();
            let loss = contrastive_loss(&pv(&ids, probs)).unwrap().item();
            let expected =
                (1.0 + n as f64).ln() - n as f64 * ((n as f64) / (n as f64 + 1.0)).ln();
            assert!(
                (loss - expected).abs() < 1e-9,
                "N={n}: {loss} vs {expected}"
            );
        }
    }

    #[test]
    fn contrastive_loss_survives_saturated_probabilities() {
        let loss = contrastive_loss(&pv(&[0, 1], vec![1.0, 0.0])).unwrap();
        assert!(loss.item().is_finite());
        let bad = contrastive_loss(&pv(&[0, 1], vec![0.0, 1.0])).unwrap();
        assert!(bad.item().is_finite());
        assert!(bad.item() > loss.item());
    }

    #[test]
    fn contrastive_loss_rejects_missing_negatives() {
        assert!(contrastive_loss(&pv(&[0], vec![1.0])).is_err());
    }

    #[test]
    fn cpr_multiplies_by_identity_then_softmaxes() {
        // Level 1 has three samples; level 2 kept them all but reordered.
        let level1 = pv(&[0, 1, 2], vec![0.5, 0.3, 0.2]);
        let level2 = pv(&[0, 2, 1], vec![0.6, 0.1, 0.3]);
        let surviving = [SampleId(0), SampleId(1), SampleId(2)];
        let out = cpr(&[level1, level2], &surviving).unwrap();
        // Products by identity: id0: .5*.6=.30, id1: .3*.3=.09, id2: .2*.1=.02
        let m = [0.30f64, 0.09, 0.02];
        let exps: Vec<f64> = m.iter().map(|v| v.exp()).collect();
        let z: f64 = exps.iter().sum();
        for (got, want) in out.values().iter().zip(exps.iter().map(|e| e / z)) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(out.ids(), &surviving);
    }

    #[test]
    fn cpr_gathers_subset_of_history() {
        let level1 = pv(&[0, 1, 2, 3], vec![0.4, 0.3, 0.2, 0.1]);
        let level2 = pv(&[0, 3, 1], vec![0.5, 0.25, 0.25]);
        let surviving = [SampleId(0), SampleId(3)];
        let out = cpr(&[level1, level2], &surviving).unwrap();
        let products: [f64; 2] = [0.4 * 0.5, 0.1 * 0.25];
        let exps: Vec<f64> = products.iter().map(|v| v.exp()).collect();
        let z: f64 = exps.iter().sum();
        for (got, want) in out.values().iter().zip(exps.iter().map(|e| e / z)) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cpr_sums_to_one() {
        let level1 = pv(&[0, 1, 2], vec![0.2, 0.5, 0.3]);
        let level2 = pv(&[0, 1, 2], vec![0.1, 0.8, 0.1]);
        let out = cpr(&[level1, level2], &[SampleId(0), SampleId(1), SampleId(2)]).unwrap();
        assert!((out.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cpr_errors_when_identity_missing_from_history() {
        let level1 = pv(&[0, 1], vec![0.6, 0.4]);
        let err = cpr(&[level1], &[SampleId(0), SampleId(5)]).unwrap_err();
        assert!(err.to_string().contains("missing from level 1"));
    }

    #[test]
    fn cpr_is_differentiable_into_history() {
        let (level1, leaf1) = pv_leaf(&[0, 1, 2], vec![0.5, 0.3, 0.2]);
        let (level2, leaf2) = pv_leaf(&[0, 2, 1], vec![0.6, 0.1, 0.3]);
        let out = cpr(
            &[level1, level2],
            &[SampleId(0), SampleId(1), SampleId(2)],
        )
        .unwrap();
        v4_level_loss(&out).unwrap().backward();
        let g1 = leaf1.grad().unwrap();
        let g2 = leaf2.grad().unwrap();
        assert!(g1.data().iter().any(|&v| v != 0.0));
        assert!(g2.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn v4_level_loss_equals_contrastive_on_cpr_vector() {
        let level1 = pv(&[0, 1, 2], vec![0.5, 0.3, 0.2]);
        let level2 = pv(&[0, 1, 2], vec![0.7, 0.2, 0.1]);
        let out = cpr(&[level1, level2], &[SampleId(0), SampleId(1), SampleId(2)]).unwrap();
        let a = v4_level_loss(&out).unwrap().item();
        // Independent scalar computation of the same quantity.
        let vals = out.values();
        let manual = -vals[0].ln() - (1.0 - vals[1]).ln() - (1.0 - vals[2]).ln();
        assert!((a - manual).abs() < 1e-12);
    }

    #[test]
    fn cascade_loss_v3_sums_first_and_last() {
        let l1 = pv(&[0, 1, 2], vec![0.5, 0.3, 0.2]);
        let l2 = pv(&[0, 1], vec![0.6, 0.4]);
        let l3 = pv(&[0, 1], vec![0.8, 0.2]);
        let first = contrastive_loss(&pv(&[0, 1, 2], vec![0.5, 0.3, 0.2]))
            .unwrap()
            .item();
        let last = contrastive_loss(&pv(&[0, 1], vec![0.8, 0.2])).unwrap().item();
        let out = cascade_loss(StrategyKind::V3, &[l1, l2, l3], &[]).unwrap();
        assert_eq!(out.components.len(), 2);
        assert_eq!(out.components[0].0, 1);
        assert_eq!(out.components[1].0, 3);
        assert!((out.total.item() - (first + last)).abs() < 1e-12);
    }

    #[test]
    fn cascade_loss_v0_is_single_level() {
        let l1 = pv(&[0, 1], vec![0.9, 0.1]);
        let out = cascade_loss(StrategyKind::V0, &[l1], &[]).unwrap();
        assert_eq!(out.components.len(), 1);
        assert_eq!(out.components[0].0, 1);
    }

    #[test]
    fn cascade_loss_rejects_phase_trained_strategies() {
        let l1 = pv(&[0, 1], vec![0.9, 0.1]);
        assert!(cascade_loss(StrategyKind::V1, &[l1], &[]).is_err());
    }
}
