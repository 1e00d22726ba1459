//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndgrad::Tensor;
use crate::scorer::{ScorerParams, TENSOR_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerHyper {
    fn default() -> Self {
        OptimizerHyper {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl OptimizerHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// First/second moment estimates for every parameter tensor, in canonical
/// tensor order, plus the step counter.
pub struct OptimizerState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl OptimizerState {
    pub fn new(params: &ScorerParams) -> Self {
        let shapes: Vec<Vec<usize>> = params
            .tensors()
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect();
        OptimizerState {
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One AdamW update over all parameter tensors.
///
/// `grads` must be in canonical tensor order. If any gradient element is
/// non-finite the step is aborted before touching parameters or moments, so
/// the caller can surface the failure with the model state intact.
pub fn adamw_step(
    params: &mut ScorerParams,
    grads: &[Tensor],
    state: &mut OptimizerState,
    hyper: &OptimizerHyper,
) -> Result<()> {
    if grads.len() != TENSOR_NAMES.len() {
        return Err(Error::Internal(format!(
            "expected {} gradient tensors, got {}",
            TENSOR_NAMES.len(),
            grads.len()
        )));
    }
    for ((name, param), grad) in params.tensors().iter().zip(grads) {
        if param.shape() != grad.shape() {
            return Err(Error::Internal(format!(
                "gradient for '{name}' has shape {:?}, parameter has {:?}",
                grad.shape(),
                param.shape()
            )));
        }
    }
    for (i, grad) in grads.iter().enumerate() {
        if !grad.all_finite() {
            return Err(Error::NonFiniteGradient {
                step: state.step + 1,
                tensor: TENSOR_NAMES[i].to_string(),
            });
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - hyper.beta1.powf(t);
    let bias2 = 1.0 - hyper.beta2.powf(t);
    for (i, (_, param)) in params.tensors_mut().into_iter().enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let g = grads[i].data();
        for (((p, m), v), &g) in param
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g)
        {
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= hyper.lr * (m_hat / (v_hat.sqrt() + hyper.eps) + hyper.weight_decay * *p);
        }
    }
    Ok(())
}
