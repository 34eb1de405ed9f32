//! Minimal reverse-mode differentiation over `f64` tensors.
//!
//! The tape is rebuilt for every forward pass. It records only the operators
//! the fault-diagnosis networks use: dense and convolutional layers, ReLU,
//! temporal pooling, softmax cross-entropy and the gradient-reversal node
//! that turns a single descent step into the adversarial saddle-point update.

mod gemm;
pub mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, finite_diff_check_at, relative_error};
pub use tape::{ConvGeometry, Gradients, Tape, Var};
pub use tensor::Tensor;

/// A named trainable tensor with its gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}
