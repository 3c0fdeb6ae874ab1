//! Per-row layer normalization with learnable gain and shift.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

use super::Param;

#[derive(Debug, Clone)]
pub struct LayerNorm<T> {
    pub gain: Param<T>,  // 1 x dim
    pub shift: Param<T>, // 1 x dim
    pub epsilon: T,
    dim: usize,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    pub normalized: Matrix<T>,
    pub inv_std: Vec<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gain: Param::new(Matrix::from_fn(1, dim, |_, _| T::one())),
            shift: Param::new(Matrix::zeros(1, dim)),
            epsilon: T::of(1e-5),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Standardizes each row to mean 0 / variance 1 (epsilon-guarded), then
    /// applies gain and shift. Zero-variance rows map to the shift vector.
    pub fn forward(&self, input: &Matrix<T>) -> Result<(Matrix<T>, LayerNormCache<T>)> {
        if input.cols() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "layernorm_forward input",
                expected: (input.rows(), self.dim),
                got: input.shape(),
            });
        }
        let n = T::of(self.dim as f64);
        let mut normalized = input.clone();
        let mut inv_std = Vec::with_capacity(input.rows());
        for r in 0..input.rows() {
            let row = normalized.row_mut(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
            let is = T::one() / (var + self.epsilon).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * is;
            }
            inv_std.push(is);
        }
        let gain = self.gain.value.row(0);
        let shift = self.shift.value.row(0);
        let mut out = normalized.clone();
        for r in 0..out.rows() {
            for ((o, &g), &s) in out.row_mut(r).iter_mut().zip(gain).zip(shift) {
                *o = *o * g + s;
            }
        }
        Ok((out, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward(
        &mut self,
        cache: &LayerNormCache<T>,
        grad_out: &Matrix<T>,
    ) -> Result<Matrix<T>> {
        let xhat = &cache.normalized;
        debug_assert_eq!(grad_out.shape(), xhat.shape());
        let n = T::of(self.dim as f64);
        let gain = self.gain.value.row(0);
        let mut grad_in = Matrix::zeros(xhat.rows(), xhat.cols());
        {
            let dgain = self.gain.grad.row_mut(0);
            let dshift = self.shift.grad.row_mut(0);
            for r in 0..xhat.rows() {
                let dy = grad_out.row(r);
                let xh = xhat.row(r);
                for c in 0..self.dim {
                    dgain[c] += dy[c] * xh[c];
                    dshift[c] += dy[c];
                }
                // dxhat = dy .* gain; then the standard layernorm input grad.
                let mut mean_dxhat = T::zero();
                let mut mean_dxhat_xhat = T::zero();
                for c in 0..self.dim {
                    let dxh = dy[c] * gain[c];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xh[c];
                }
                mean_dxhat = mean_dxhat / n;
                mean_dxhat_xhat = mean_dxhat_xhat / n;
                let is = cache.inv_std[r];
                for (c, gi) in grad_in.row_mut(r).iter_mut().enumerate() {
                    let dxh = dy[c] * gain[c];
                    *gi = (dxh - mean_dxhat - xh[c] * mean_dxhat_xhat) * is;
                }
            }
        }
        Ok(grad_in)
    }

    pub fn visit_params(&mut self, name: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&format!("{name}.gain"), &mut self.gain);
        f(&format!("{name}.shift"), &mut self.shift);
    }
}
