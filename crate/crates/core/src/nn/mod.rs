//! Dense layer primitives with hand-written backward passes, the AdamW
//! optimizer, and a finite-difference gradient-check harness.

pub mod activation;
pub mod adamw;
pub mod dropout;
pub mod gradcheck;
pub mod layernorm;
pub mod linear;
pub mod mlp;

pub use activation::{gelu, gelu_backward, sigmoid_scalar, softmax_rows, softmax_rows_backward};
pub use adamw::AdamW;
pub use dropout::dropout_forward;
pub use gradcheck::{grad_check, GradCheckReport, WithInputs};
pub use layernorm::LayerNorm;
pub use linear::Linear;
pub use mlp::{Mlp, MlpCache};

use crate::matrix::Matrix;
use crate::scalar::Real;

/// Forward-pass mode: training applies dropout, evaluation is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Anything that exposes its parameters by stable name, in a stable order.
/// The order defines both the optimizer walk and the checkpoint layout.
pub trait Parameterized<T: Real> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>));

    fn zero_grads(&mut self) {
        self.visit_params(&mut |_, p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.value.data().len());
        n
    }
}
