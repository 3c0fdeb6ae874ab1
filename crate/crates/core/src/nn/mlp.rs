//! A sequential block of Norm / Linear / GELU / Dropout layers with a
//! hand-written backward pass. All network pieces in the fusion model and
//! the baselines are instances of this block.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::{key_with, stream_key};
use crate::scalar::Real;

use super::activation::{gelu, gelu_backward};
use super::dropout::dropout_forward;
use super::layernorm::{LayerNorm, LayerNormCache};
use super::linear::Linear;
use super::{Mode, Param, Parameterized};

/// Layer recipe used when building a block.
#[derive(Debug, Clone, Copy)]
pub enum LayerSpec {
    Norm,
    Linear(usize),
    Gelu,
    Dropout(f64),
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Norm(LayerNorm<T>),
    Linear(Linear<T>),
    Gelu,
    Dropout(f64),
}

#[derive(Debug, Clone)]
pub struct Mlp<T> {
    name: String,
    layers: Vec<Layer<T>>,
    mask_keys: Vec<u64>,
    in_dim: usize,
    out_dim: usize,
}

/// Per-layer values saved by a training forward pass.
pub struct MlpCache<T> {
    inputs: Vec<Matrix<T>>,
    ln: Vec<Option<LayerNormCache<T>>>,
    masks: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Mlp<T> {
    pub fn build(name: &str, seed: u64, in_dim: usize, spec: &[LayerSpec]) -> Self {
        let mut layers = Vec::with_capacity(spec.len());
        let mut mask_keys = Vec::with_capacity(spec.len());
        let mut dim = in_dim;
        for (i, s) in spec.iter().enumerate() {
            let layer_name = format!("{name}.{i}");
            mask_keys.push(stream_key(seed, &["dropout", &layer_name]));
            layers.push(match *s {
                LayerSpec::Norm => Layer::Norm(LayerNorm::new(dim)),
                LayerSpec::Linear(out) => {
                    let l = Linear::new(dim, out, seed, &layer_name);
                    dim = out;
                    Layer::Linear(l)
                }
                LayerSpec::Gelu => Layer::Gelu,
                LayerSpec::Dropout(p) => Layer::Dropout(p),
            });
        }
        Mlp {
            name: name.to_string(),
            layers,
            mask_keys,
            in_dim,
            out_dim: dim,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Zero the weights and bias of the final Linear layer (used to pin a
    /// head to a known output, e.g. a uniform router).
    pub fn zero_last_linear(&mut self) {
        for layer in self.layers.iter_mut().rev() {
            if let Layer::Linear(l) = layer {
                l.weight.value.fill(T::zero());
                l.bias.value.fill(T::zero());
                return;
            }
        }
    }

    /// Training forward: applies dropout masks keyed by `step` and returns
    /// the cache needed by `backward`.
    pub fn forward(
        &self,
        input: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<(Matrix<T>, MlpCache<T>)> {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            ln: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Norm(ln) => {
                    let (out, c) = ln.forward(&cur)?;
                    cache.inputs.push(Matrix::zeros(0, 0));
                    cache.ln.push(Some(c));
                    cache.masks.push(None);
                    cur = out;
                }
                Layer::Linear(l) => {
                    let out = l.forward(&cur)?;
                    cache.inputs.push(cur);
                    cache.ln.push(None);
                    cache.masks.push(None);
                    cur = out;
                }
                Layer::Gelu => {
                    let out = gelu(&cur);
                    cache.inputs.push(cur);
                    cache.ln.push(None);
                    cache.masks.push(None);
                    cur = out;
                }
                Layer::Dropout(p) => {
                    let key = key_with(self.mask_keys[i], step);
                    let (out, mask) = dropout_forward(&cur, *p, mode, key)?;
                    cache.inputs.push(Matrix::zeros(0, 0));
                    cache.ln.push(None);
                    cache.masks.push(mask);
                    cur = out;
                }
            }
        }
        Ok((cur, cache))
    }

    /// Evaluation forward without cache allocation; dropout is identity.
    pub fn forward_eval(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        let mut cur = input.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Norm(ln) => ln.forward(&cur)?.0,
                Layer::Linear(l) => l.forward(&cur)?,
                Layer::Gelu => gelu(&cur),
                Layer::Dropout(_) => cur,
            };
        }
        Ok(cur)
    }

    /// Backward through the block, accumulating parameter gradients and
    /// returning the gradient w.r.t. the block input.
    pub fn backward(&mut self, cache: &MlpCache<T>, grad_out: &Matrix<T>) -> Result<Matrix<T>> {
        let mut grad = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            grad = match &mut self.layers[i] {
                Layer::Norm(ln) => {
                    let c = cache.ln[i].as_ref().expect("layernorm cache");
                    ln.backward(c, &grad)?
                }
                Layer::Linear(l) => l.backward(&cache.inputs[i], &grad)?,
                Layer::Gelu => gelu_backward(&cache.inputs[i], &grad),
                Layer::Dropout(_) => match &cache.masks[i] {
                    Some(mask) => grad.hadamard(mask),
                    None => grad,
                },
            };
        }
        Ok(grad)
    }
}

impl<T: Real> Parameterized<T> for Mlp<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        let name = self.name.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Norm(ln) => ln.visit_params(&format!("{name}.{i}"), f),
                Layer::Linear(l) => l.visit_params(&format!("{name}.{i}"), f),
                Layer::Gelu | Layer::Dropout(_) => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn block() -> Mlp<f64> {
        Mlp::build(
            "blk",
            5,
            6,
            &[
                LayerSpec::Norm,
                LayerSpec::Linear(4),
                LayerSpec::Gelu,
                LayerSpec::Dropout(0.2),
            ],
        )
    }

    #[test]
    fn eval_forward_is_deterministic_and_cache_free() {
        let m = block();
        let mut rng = Stream::new(1, &["x"]);
        let x = Matrix::from_fn(3, 6, |_, _| rng.next_range(-1.0, 1.0));
        let a = m.forward_eval(&x).unwrap();
        let b = m.forward_eval(&x).unwrap();
        assert_eq!(a, b);
        let (c, _) = m.forward(&x, Mode::Eval, 0).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn train_forward_reproduces_masks_per_step() {
        let m = block();
        let mut rng = Stream::new(2, &["x"]);
        let x = Matrix::from_fn(3, 6, |_, _| rng.next_range(-1.0, 1.0));
        let (a, _) = m.forward(&x, Mode::Train, 7).unwrap();
        let (b, _) = m.forward(&x, Mode::Train, 7).unwrap();
        let (c, _) = m.forward(&x, Mode::Train, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn same_seed_same_parameters() {
        let mut a = block();
        let mut b = block();
        let mut names_a = Vec::new();
        a.visit_params(&mut |n, p| names_a.push((n.to_string(), p.value.clone())));
        let mut identical = true;
        let mut i = 0;
        b.visit_params(&mut |n, p| {
            let (na, va) = &names_a[i];
            identical &= na == n && *va == p.value;
            i += 1;
        });
        assert!(identical && i == 4); // gain, shift, weight, bias
    }
}
