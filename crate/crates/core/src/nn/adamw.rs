//! AdamW with decoupled weight decay and bias correction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::Parameterized;

#[derive(Debug, Clone)]
pub struct AdamW<T> {
    pub learning_rate: T,
    pub weight_decay: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    step_count: u64,
    moments: BTreeMap<String, (Vec<T>, Vec<T>)>,
}

impl<T: Real> AdamW<T> {
    pub fn new(learning_rate: T, weight_decay: T) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            step_count: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over every parameter of the model, consuming the gradients
    /// currently stored in the parameter buffers.
    ///
    /// theta <- theta * (1 - lr * wd) - lr * mhat / (sqrt(vhat) + eps)
    pub fn step<M: Parameterized<T>>(&mut self, model: &mut M) -> Result<()> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let (lr, wd) = (self.learning_rate, self.weight_decay);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let one = T::one();
        let moments = &mut self.moments;
        let mut bad_param: Option<String> = None;
        model.visit_params(&mut |name, param| {
            if bad_param.is_some() {
                return;
            }
            let n = param.value.data().len();
            let (m, v) = moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![T::zero(); n], vec![T::zero(); n]));
            debug_assert_eq!(m.len(), n);
            for ((p, &g), (mi, vi)) in param
                .value
                .data_mut()
                .iter_mut()
                .zip(param.grad.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                if !g.is_finite() {
                    bad_param = Some(name.to_string());
                    return;
                }
                *mi = b1 * *mi + (one - b1) * g;
                *vi = b2 * *vi + (one - b2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p = *p * (one - lr * wd) - lr * mhat / (vhat.sqrt() + eps);
            }
        });
        if let Some(name) = bad_param {
            return Err(Error::NonFinite {
                context: format!("gradient of parameter `{name}` at step {t}"),
            });
        }
        Ok(())
    }
}
