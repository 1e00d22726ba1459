//! Minimal reverse-mode autodiff engine.
//!
//! The engine is deliberately small: dense `f64` tensors, a fixed set of
//! operations, and per-batch graphs built from [`Node`]s that are consumed by
//! a single [`Node::backward`] call. There is no broadcasting (beyond the
//! scalar helpers), no views, and no in-place mutation of graph values; every
//! op allocates its output. That keeps the gradient story auditable: each op
//! carries its own local backward closure and nothing else touches gradients.
//!
//! Discrete choices made during a forward pass — which negatives a cascade
//! level keeps — are realized *outside* the graph and re-enter it as index
//! lists (see [`Node::select`]), so selection is a non-differentiable
//! operation by construction and gradients flow only through the retained
//! scores.

mod node;
mod tensor;

pub use node::Node;
pub use tensor::Tensor;
