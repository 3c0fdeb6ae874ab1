//! Affine layer y = x W^T + b with accumulated gradients.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Stream;
use crate::scalar::Real;

use super::Param;

#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub weight: Param<T>, // out x in
    pub bias: Param<T>,   // 1 x out
    in_dim: usize,
    out_dim: usize,
}

impl<T: Real> Linear<T> {
    /// Kaiming-uniform fan-in init for the weight, zero bias. The init
    /// stream is keyed by the parameter name so layers with the same name
    /// are bit-identical across model variants.
    pub fn new(in_dim: usize, out_dim: usize, seed: u64, name: &str) -> Self {
        let mut stream = Stream::new(seed, &["init", name, "weight"]);
        let limit = (6.0 / in_dim as f64).sqrt();
        let weight = Matrix::from_fn(out_dim, in_dim, |_, _| {
            T::of(stream.next_range(-limit, limit))
        });
        Linear {
            weight: Param::new(weight),
            bias: Param::new(Matrix::zeros(1, out_dim)),
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        if input.cols() != self.in_dim {
            return Err(Error::ShapeMismatch {
                context: "linear_forward input",
                expected: (input.rows(), self.in_dim),
                got: input.shape(),
            });
        }
        let mut out = input.matmul_nt(&self.weight.value)?;
        let bias = self.bias.value.row(0);
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Accumulates dW and db from `grad_out` (B x out) and the forward
    /// input (B x in); returns the gradient w.r.t. the input.
    pub fn backward(&mut self, input: &Matrix<T>, grad_out: &Matrix<T>) -> Result<Matrix<T>> {
        debug_assert_eq!(grad_out.cols(), self.out_dim);
        debug_assert_eq!(input.rows(), grad_out.rows());
        // dW += grad_out^T . input, via the gemm kernel into a scratch
        // buffer (the kernel overwrites its destination).
        let batch = input.rows();
        let mut delta = Matrix::zeros(self.out_dim, self.in_dim);
        T::gemm(
            self.out_dim,
            batch,
            self.in_dim,
            grad_out.data(),
            1,
            self.out_dim as isize,
            input.data(),
            self.in_dim as isize,
            1,
            delta.data_mut(),
        );
        self.weight.grad.add_assign(&delta);
        let db = self.bias.grad.row_mut(0);
        for r in 0..batch {
            for (o, &go) in grad_out.row(r).iter().enumerate() {
                db[o] += go;
            }
        }
        grad_out.matmul_nn(&self.weight.value)
    }

    pub fn visit_params(&mut self, name: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&format!("{name}.weight"), &mut self.weight);
        f(&format!("{name}.bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer_from(weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Linear<f64> {
        let out_dim = weight.len();
        let in_dim = weight[0].len();
        let mut l = Linear::new(in_dim, out_dim, 0, "t");
        l.weight.value = Matrix::from_rows(&weight).unwrap();
        l.bias.value = Matrix::from_rows(&[bias]).unwrap();
        l
    }

    #[test]
    fn identity_map() {
        let l = layer_from(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        let x = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().row(0), &[3.0, 4.0]);
    }

    #[test]
    fn scalar_affine() {
        let l = layer_from(vec![vec![2.0]], vec![1.0]);
        let x = Matrix::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().get(0, 0), 7.0);
    }

    #[test]
    fn random_layer_matches_triple_loop() {
        let mut rng = Stream::new(21, &["linear"]);
        let l = Linear::<f64>::new(8, 5, 21, "rand");
        let x = Matrix::from_fn(4, 8, |_, _| rng.next_range(-1.0, 1.0));
        let out = l.forward(&x).unwrap();
        for r in 0..4 {
            for o in 0..5 {
                let mut s = l.bias.value.get(0, o);
                for k in 0..8 {
                    s += x.get(r, k) * l.weight.value.get(o, k);
                }
                let rel = (out.get(r, o) - s).abs() / s.abs().max(1.0);
                assert!(rel < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let l = Linear::<f64>::new(4, 2, 0, "t");
        let x = Matrix::<f64>::zeros(1, 3);
        let msg = l.forward(&x).unwrap_err().to_string();
        assert!(msg.contains("1x4") && msg.contains("1x3"), "{msg}");
    }

    #[test]
    fn init_is_seed_deterministic_and_fan_in_bounded() {
        let a = Linear::<f64>::new(100, 3, 7, "layer");
        let b = Linear::<f64>::new(100, 3, 7, "layer");
        assert_eq!(a.weight.value, b.weight.value);
        let limit = (6.0 / 100.0_f64).sqrt();
        assert!(a.weight.value.data().iter().all(|w| w.abs() < limit));
        assert!(a.bias.value.data().iter().all(|&b| b == 0.0));
    }
}
