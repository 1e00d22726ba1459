//! Text encoding and the relevance scorer.
//!
//! Text is tokenized by lowercasing and splitting on non-alphanumeric runs,
//! then each token is mapped to an embedding row with the 64-bit FNV-1a
//! hashing trick — there is no vocabulary file, just `hash(token) mod
//! vocab_buckets`. A query/document pair is scored by mean-pooling both token
//! embedding sets, combining them into the feature vector
//! `[e_q, e_d, e_q ⊙ e_d, |e_q − e_d|]`, and passing that through a one
//! hidden layer MLP with ReLU to a single relevance logit.
//!
//! Parameters live in [`ScorerParams`] as plain tensors; a training batch
//! binds them into graph leaves once via [`ParamNodes`] so that every pair in
//! the batch shares the same leaves and gradients accumulate across pairs.

use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndgrad::{Node, Tensor};
use crate::sir::{ScoreVector, TrainingBlock};

/// 64-bit FNV-1a over a byte string.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// A tokenized text as a sequence of embedding-bucket ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedText {
    ids: Vec<u32>,
}

impl EncodedText {
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Tokenize and hash a text into bucket ids.
///
/// Tokens are maximal runs of alphanumeric characters in the lowercased
/// text; each token hashes to `fnv1a_64(token) % vocab_buckets`.
pub fn encode(text: &str, vocab_buckets: usize) -> EncodedText {
    assert!(vocab_buckets > 0, "vocab_buckets must be positive");
    let lowered = text.to_lowercase();
    let ids = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .map(|tok| (fnv1a_64(tok.as_bytes()) % vocab_buckets as u64) as u32)
        .collect();
    EncodedText { ids }
}

/// Architecture and initialization hyperparameters of the scorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerHyper {
    pub vocab_buckets: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl ScorerHyper {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_buckets == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(format!(
                "scorer dimensions must be positive: vocab_buckets={}, embed_dim={}, hidden_dim={}",
                self.vocab_buckets, self.embed_dim, self.hidden_dim
            )));
        }
        Ok(())
    }
}

/// The canonical tensor order used everywhere parameters are enumerated:
/// optimizer state, gradients, and checkpoint layout.
pub const TENSOR_NAMES: [&str; 5] = ["embedding_table", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"];

/// All trainable parameters of one scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    pub hyper: ScorerHyper,
    pub embedding_table: Tensor,
    pub mlp_w1: Tensor,
    pub mlp_b1: Tensor,
    pub mlp_w2: Tensor,
    pub mlp_b2: Tensor,
}

impl ScorerParams {
    /// Seeded uniform initialization. Weights are drawn from
    /// `[-1/sqrt(embed_dim), 1/sqrt(embed_dim))` in canonical tensor order
    /// (the draw order is part of the determinism contract); biases start at
    /// zero.
    pub fn init(hyper: &ScorerHyper) -> Result<Self> {
        hyper.validate()?;
        let (v, d, h) = (hyper.vocab_buckets, hyper.embed_dim, hyper.hidden_dim);
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = Pcg64::seed_from_u64(hyper.seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        Ok(ScorerParams {
            hyper: hyper.clone(),
            embedding_table: Tensor::new(vec![v, d], draw(v * d)),
            mlp_w1: Tensor::new(vec![4 * d, h], draw(4 * d * h)),
            mlp_b1: Tensor::zeros(&[1, h]),
            mlp_w2: Tensor::new(vec![h, 1], draw(h)),
            mlp_b2: Tensor::zeros(&[1, 1]),
        })
    }

    /// Tensors in canonical order, paired with their names.
    pub fn tensors(&self) -> [(&'static str, &Tensor); 5] {
        [
            (TENSOR_NAMES[0], &self.embedding_table),
            (TENSOR_NAMES[1], &self.mlp_w1),
            (TENSOR_NAMES[2], &self.mlp_b1),
            (TENSOR_NAMES[3], &self.mlp_w2),
            (TENSOR_NAMES[4], &self.mlp_b2),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 5] {
        [
            (TENSOR_NAMES[0], &mut self.embedding_table),
            (TENSOR_NAMES[1], &mut self.mlp_w1),
            (TENSOR_NAMES[2], &mut self.mlp_b1),
            (TENSOR_NAMES[3], &mut self.mlp_w2),
            (TENSOR_NAMES[4], &mut self.mlp_b2),
        ]
    }

    /// Check that every tensor has the shape implied by `hyper`.
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        let (v, d, h) = (
            self.hyper.vocab_buckets,
            self.hyper.embed_dim,
            self.hyper.hidden_dim,
        );
        let expected: [(&str, Vec<usize>); 5] = [
            ("embedding_table", vec![v, d]),
            ("mlp_w1", vec![4 * d, h]),
            ("mlp_b1", vec![1, h]),
            ("mlp_w2", vec![h, 1]),
            ("mlp_b2", vec![1, 1]),
        ];
        for ((name, tensor), (_, shape)) in self.tensors().iter().zip(expected.iter()) {
            if tensor.shape() != shape.as_slice() {
                return Err(Error::Internal(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    tensor.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }

}

/// The scorer's parameters bound into one autodiff graph as leaves.
///
/// Build one `ParamNodes` per training batch so every scored pair shares the
/// same leaves; after `backward`, [`ParamNodes::grads`] yields the summed
/// gradients in canonical tensor order.
pub struct ParamNodes {
    pub embedding_table: Node,
    pub mlp_w1: Node,
    pub mlp_b1: Node,
    pub mlp_w2: Node,
    pub mlp_b2: Node,
    embed_dim: usize,
}

impl ParamNodes {
    /// Differentiable leaves, for training.
    pub fn new(params: &ScorerParams) -> Self {
        ParamNodes {
            embedding_table: Node::leaf(params.embedding_table.clone()),
            mlp_w1: Node::leaf(params.mlp_w1.clone()),
            mlp_b1: Node::leaf(params.mlp_b1.clone()),
            mlp_w2: Node::leaf(params.mlp_w2.clone()),
            mlp_b2: Node::leaf(params.mlp_b2.clone()),
            embed_dim: params.hyper.embed_dim,
        }
    }

    /// Non-differentiable leaves, for inference-only scoring.
    pub fn constant(params: &ScorerParams) -> Self {
        ParamNodes {
            embedding_table: Node::constant(params.embedding_table.clone()),
            mlp_w1: Node::constant(params.mlp_w1.clone()),
            mlp_b1: Node::constant(params.mlp_b1.clone()),
            mlp_w2: Node::constant(params.mlp_w2.clone()),
            mlp_b2: Node::constant(params.mlp_b2.clone()),
            embed_dim: params.hyper.embed_dim,
        }
    }

    /// Gradients in canonical tensor order. A parameter the graph never
    /// touched (e.g. the table when every text in the batch was empty) gets
    /// a zero gradient of the right shape.
    pub fn grads(&self) -> Vec<Tensor> {
        [
            &self.embedding_table,
            &self.mlp_w1,
            &self.mlp_b1,
            &self.mlp_w2,
            &self.mlp_b2,
        ]
        .iter()
        .map(|node| {
            node.grad()
                .unwrap_or_else(|| Tensor::zeros(&node.shape()))
        })
        .collect()
    }
}

/// Score one query/document pair, returning the relevance logit as a
/// single-element node attached to the graph rooted at `params`.
pub fn score_pair(params: &ParamNodes, query: &EncodedText, doc: &EncodedText) -> Node {
    let d = params.embed_dim;
    let to_rows = |text: &EncodedText| -> Vec<usize> {
        text.ids().iter().map(|&id| id as usize).collect()
    };
    let e_q = params.embedding_table.rows_mean(&to_rows(query));
    let e_d = params.embedding_table.rows_mean(&to_rows(doc));
    let prod = e_q.mul(&e_d);
    let diff = e_q.sub(&e_d).abs();
    let features = Node::concat(&[e_q, e_d, prod, diff]).reshape(&[1, 4 * d]);
    let hidden = features
        .matmul(&params.mlp_w1)
        .add(&params.mlp_b1)
        .relu();
    hidden
        .matmul(&params.mlp_w2)
        .add(&params.mlp_b2)
        .reshape(&[1])
}

/// Score every sample in a block against its query. The resulting vector
/// keeps the block's sample order: the positive logit first, negatives after.
pub fn score_block(params: &ParamNodes, block: &TrainingBlock) -> Result<ScoreVector> {
    let logits: Vec<Node> = block
        .samples()
        .iter()
        .map(|sample| score_pair(params, block.query(), &sample.text))
        .collect();
    let ids = block.samples().iter().map(|s| s.sample_id).collect();
    ScoreVector::new(ids, Node::stack(&logits))
}
