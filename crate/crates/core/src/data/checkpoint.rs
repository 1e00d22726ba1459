//! Binary checkpoint container for scorer parameters.
//!
//! Layout, all integers little-endian:
//!
//! | offset          | bytes | content                                   |
//! |-----------------|-------|-------------------------------------------|
//! | 0               | 4     | magic `SIRC`                              |
//! | 4               | 4     | format version, u32 (currently 1)         |
//! | 8               | 4     | metadata length `L`, u32                  |
//! | 12              | `L`   | UTF-8 JSON metadata                       |
//! | 12 + `L`        | 4·Σn  | tensor values, f32, canonical order       |
//!
//! The metadata records the tensor names and shapes, the scorer
//! hyperparameters, and the seed the parameters were created with. Values
//! are stored as f32, so a round trip loses at most one f32 rounding step
//! per value. Every load failure reports the byte offset where the file
//! stopped making sense.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndgrad::Tensor;
use crate::scorer::{ScorerHyper, ScorerParams, TENSOR_NAMES};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SIRC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CheckpointMeta {
    tensors: Vec<TensorMeta>,
    hyper: ScorerHyper,
    creation_seed: u64,
}

fn corrupt(offset: u64, msg: impl Into<String>) -> Error {
    Error::Checkpoint {
        offset,
        msg: msg.into(),
    }
}

/// Serialize `params` to `path` in the container format above.
pub fn save_checkpoint(params: &ScorerParams, path: &Path) -> Result<()> {
    params.validate()?;
    let meta = CheckpointMeta {
        tensors: params
            .tensors()
            .iter()
            .map(|(name, t)| TensorMeta {
                name: (*name).to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        hyper: params.hyper.clone(),
        creation_seed: params.hyper.seed,
    };
    let meta_bytes = serde_json::to_vec(&meta)
        .map_err(|e| Error::Internal(format!("checkpoint metadata serialization failed: {e}")))?;
    let meta_len = u32::try_from(meta_bytes.len())
        .map_err(|_| Error::Internal("checkpoint metadata exceeds u32 length".into()))?;

    let total_values: usize = params.tensors().iter().map(|(_, t)| t.numel()).sum();
    let mut out = Vec::with_capacity(12 + meta_bytes.len() + 4 * total_values);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    for (_, tensor) in params.tensors() {
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, &out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Deserialize a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<ScorerParams> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    load_checkpoint_bytes(&bytes)
}

fn load_checkpoint_bytes(bytes: &[u8]) -> Result<ScorerParams> {
    let take = |offset: usize, len: usize, what: &str| -> Result<&[u8]> {
        bytes.get(offset..offset + len).ok_or_else(|| {
            corrupt(
                bytes.len() as u64,
                format!(
                    "file truncated while reading {what}: need bytes {offset}..{} but file has {}",
                    offset + len,
                    bytes.len()
                ),
            )
        })
    };

    let magic = take(0, 4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(corrupt(
            0,
            format!("bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?} (`SIRC`)"),
        ));
    }
    let version = u32::from_le_bytes(take(4, 4, "format version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(
            4,
            format!("unsupported format version {version}, expected {CHECKPOINT_VERSION}"),
        ));
    }
    let meta_len = u32::from_le_bytes(take(8, 4, "metadata length")?.try_into().unwrap()) as usize;
    let meta_bytes = take(12, meta_len, "metadata")?;
    let meta: CheckpointMeta = serde_json::from_slice(meta_bytes)
        .map_err(|e| corrupt(12, format!("metadata is not valid JSON metadata: {e}")))?;
    meta.hyper
        .validate()
        .map_err(|e| corrupt(12, format!("metadata carries invalid hyperparameters: {e}")))?;

    let (v, d, h) = (
        meta.hyper.vocab_buckets,
        meta.hyper.embed_dim,
        meta.hyper.hidden_dim,
    );
    let expected_shapes: [Vec<usize>; 5] = [
        vec![v, d],
        vec![4 * d, h],
        vec![1, h],
        vec![h, 1],
        vec![1, 1],
    ];
    if meta.tensors.len() != TENSOR_NAMES.len() {
        return Err(corrupt(
            12,
            format!(
                "metadata declares {} tensors, expected {}",
                meta.tensors.len(),
                TENSOR_NAMES.len()
            ),
        ));
    }
    for (tm, (name, shape)) in meta
        .tensors
        .iter()
        .zip(TENSOR_NAMES.iter().zip(expected_shapes.iter()))
    {
        if tm.name != *name {
            return Err(corrupt(
                12,
                format!("metadata tensor '{}' out of order, expected '{name}'", tm.name),
            ));
        }
        if tm.shape != *shape {
            return Err(corrupt(
                12,
                format!(
                    "tensor '{name}' has shape {:?} in metadata but hyperparameters imply {shape:?}",
                    tm.shape
                ),
            ));
        }
    }

    let data_start = 12 + meta_len;
    let total_values: usize = expected_shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let data_end = data_start + 4 * total_values;
    if bytes.len() > data_end {
        return Err(corrupt(
            data_end as u64,
            format!("{} trailing bytes after tensor data", bytes.len() - data_end),
        ));
    }

    let mut offset = data_start;
    let mut read_tensor = |shape: &[usize], name: &str| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let raw = take(offset, 4 * n, &format!("tensor '{name}'"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        offset += 4 * n;
        Ok(Tensor::new(shape.to_vec(), data))
    };

    let params = ScorerParams {
        hyper: meta.hyper.clone(),
        embedding_table: read_tensor(&expected_shapes[0], TENSOR_NAMES[0])?,
        mlp_w1: read_tensor(&expected_shapes[1], TENSOR_NAMES[1])?,
        mlp_b1: read_tensor(&expected_shapes[2], TENSOR_NAMES[2])?,
        mlp_w2: read_tensor(&expected_shapes[3], TENSOR_NAMES[3])?,
        mlp_b2: read_tensor(&expected_shapes[4], TENSOR_NAMES[4])?,
    };
    params.validate()?;
    Ok(params)
}
