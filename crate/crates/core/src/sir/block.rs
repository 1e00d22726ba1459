//! Training blocks and score/probability vectors.
//!
//! A block is one query with one positive document and N negatives. Sample
//! identity is tracked through every compression level by [`SampleId`], which
//! names a sample's position in the *original* block: id 0 is always the
//! positive, and a negative keeps its id no matter how the block shrinks or
//! reorders around it. Per-level probability vectors are aligned by these
//! ids, never by physical position.

use crate::error::{Error, Result};
use crate::ndgrad::Node;
use crate::scorer::EncodedText;

/// Identity of a sample within its original block. Id 0 is the positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

/// One document in a training block.
#[derive(Debug, Clone)]
pub struct Sample {
    pub sample_id: SampleId,
    pub doc_id: String,
    pub text: EncodedText,
    pub label: Label,
    /// For synthetic data: the difficulty level this negative was planted
    /// with. `None` for real data and for positives.
    pub planted_difficulty: Option<u32>,
}

impl Sample {
    pub fn positive(sample_id: SampleId, doc_id: impl Into<String>, text: EncodedText) -> Self {
        Sample {
            sample_id,
            doc_id: doc_id.into(),
            text,
            label: Label::Positive,
            planted_difficulty: None,
        }
    }

    pub fn negative(
        sample_id: SampleId,
        doc_id: impl Into<String>,
        text: EncodedText,
        planted_difficulty: Option<u32>,
    ) -> Self {
        Sample {
            sample_id,
            doc_id: doc_id.into(),
            text,
            label: Label::Negative,
            planted_difficulty,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }
}

/// One query with its positive (always first) and negatives.
#[derive(Debug, Clone)]
pub struct TrainingBlock {
    query_id: String,
    query: EncodedText,
    samples: Vec<Sample>,
}

impl TrainingBlock {
    /// Build a block, enforcing the structural invariants: at least two
    /// samples, exactly one positive sitting at index 0, and unique sample
    /// ids.
    pub fn new(query_id: String, query: EncodedText, samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "block for query '{query_id}' needs a positive and at least one negative, \
                 got {} samples",
                samples.len()
            )));
        }
        if !samples[0].is_positive() {
            return Err(Error::InvalidArgument(format!(
                "block for query '{query_id}' must have the positive at index 0"
            )));
        }
        if samples.iter().skip(1).any(Sample::is_positive) {
            return Err(Error::InvalidArgument(format!(
                "block for query '{query_id}' has more than one positive"
            )));
        }
        let mut ids: Vec<SampleId> = samples.iter().map(|s| s.sample_id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "block for query '{query_id}' has duplicate sample ids"
            )));
        }
        Ok(TrainingBlock {
            query_id,
            query,
            samples,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn query(&self) -> &EncodedText {
        &self.query
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn positive(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn negatives(&self) -> &[Sample] {
        &self.samples[1..]
    }

    pub fn num_negatives(&self) -> usize {
        self.samples.len() - 1
    }
}

/// Relevance logits for one block, positive first, aligned with `ids`.
#[derive(Debug)]
pub struct ScoreVector {
    ids: Vec<SampleId>,
    logits: Node,
}

impl ScoreVector {
    pub fn new(ids: Vec<SampleId>, logits: Node) -> Result<Self> {
        let shape = logits.shape();
        if shape.len() != 1 || shape[0] != ids.len() {
            return Err(Error::Internal(format!(
                "score vector shape {:?} does not match {} sample ids",
                shape,
                ids.len()
            )));
        }
        Ok(ScoreVector { ids, logits })
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    /// The logits node, shape `[len]`.
    pub fn logits(&self) -> &Node {
        &self.logits
    }

    /// Current logit values.
    pub fn values(&self) -> Vec<f64> {
        self.logits.value().data().to_vec()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Per-sample probabilities for one block, aligned with `ids`.
#[derive(Debug)]
pub struct ProbVector {
    ids: Vec<SampleId>,
    probs: Node,
}

impl ProbVector {
    pub fn new(ids: Vec<SampleId>, probs: Node) -> Result<Self> {
        let shape = probs.shape();
        if shape.len() != 1 || shape[0] != ids.len() {
            return Err(Error::Internal(format!(
                "probability vector shape {:?} does not match {} sample ids",
                shape,
                ids.len()
            )));
        }
        Ok(ProbVector { ids, probs })
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    /// The probabilities node, shape `[len]`.
    pub fn probs(&self) -> &Node {
        &self.probs
    }

    pub fn values(&self) -> Vec<f64> {
        self.probs.value().data().to_vec()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Position of `id` in this vector, if present.
    pub fn position_of(&self, id: SampleId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

/// Softmax over a block's logits, keeping the id alignment.
pub fn softmax_scores(scores: &ScoreVector) -> ProbVector {
    ProbVector {
        ids: scores.ids.clone(),
        probs: scores.logits.softmax(),
    }
}
