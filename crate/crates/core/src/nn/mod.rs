//! Minimal differentiable-layer substrate.
//!
//! Each layer implements an explicit forward and an explicit adjoint
//! (backward) that accumulates parameter gradients and returns the input
//! gradient. There is no tape: the model graph is a fixed pipeline, so
//! per-layer adjoints composed by hand are sufficient and every one of
//! them is validated against central differences.

pub mod activation;
pub mod adam;
pub mod conv1d;
pub mod gradcheck;
pub mod layernorm;
pub mod linear;

pub use activation::{activation_backward, activation_forward, Activation};
pub use adam::{AdamConfig, AdamState};
pub use conv1d::Conv1d;
pub use gradcheck::{central_difference, max_relative_error, GradCheckEntry, GradCheckReport};
pub use layernorm::LayerNorm;
pub use linear::Linear;

use crate::tensor::Tensor;

/// A learnable tensor paired with its gradient accumulator of equal shape.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Layer kind tag, used in reports and error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Linear,
    Conv1d,
    LayerNorm,
    Activation,
}

/// Visitor over named parameters in declaration order. The walk order is
/// the serialization order of checkpoints and the slot order of the
/// optimizer, so it must stay stable.
pub trait Parameterized {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param));

    fn zero_grads(&mut self) {
        self.visit_params("", &mut |_, p| p.zero_grad());
    }
}

/// Parameter values flattened in walk order.
pub fn collect_param_values(p: &mut dyn Parameterized) -> Vec<f64> {
    let mut out = Vec::new();
    p.visit_params("", &mut |_, param| out.extend_from_slice(param.value.data()));
    out
}

/// Gradients flattened in walk order.
pub fn collect_param_grads(p: &mut dyn Parameterized) -> Vec<f64> {
    let mut out = Vec::new();
    p.visit_params("", &mut |_, param| out.extend_from_slice(param.grad.data()));
    out
}

/// Overwrites parameter values from a flat buffer in walk order; panics if
/// the buffer length does not match the walk.
pub fn set_param_values(p: &mut dyn Parameterized, flat: &[f64]) {
    let mut offset = 0;
    p.visit_params("", &mut |_, param| {
        let len = param.value.len();
        param
            .value
            .data_mut()
            .copy_from_slice(&flat[offset..offset + len]);
        offset += len;
    });
    assert_eq!(offset, flat.len(), "flat parameter buffer length mismatch");
}

/// `(name, element_count)` pairs in walk order.
pub fn param_layout(p: &mut dyn Parameterized) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    p.visit_params("", &mut |name, param| out.push((name, param.value.len())));
    out
}
