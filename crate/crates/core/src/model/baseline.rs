//! Baseline architectures: single-modality MLP classifiers and the
//! concatenation MLP.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::mlp::{LayerSpec, Mlp, MlpCache};
use crate::nn::{sigmoid_scalar, Mode, Param, Parameterized};
use crate::scalar::Real;

use super::{FusionConfig, ModelKind};

#[derive(Debug, Clone)]
pub struct BaselineModel<T> {
    pub kind: ModelKind,
    pub config: FusionConfig,
    pub seed: u64,
    net: Mlp<T>,
}

impl<T: Real> BaselineModel<T> {
    pub fn new(kind: ModelKind, config: &FusionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.latent_dim;
        let p = config.dropout;
        let single = |in_dim: usize, name: &str| {
            Mlp::build(
                name,
                seed,
                in_dim,
                &[
                    LayerSpec::Norm,
                    LayerSpec::Linear(d),
                    LayerSpec::Gelu,
                    LayerSpec::Dropout(p),
                    LayerSpec::Linear(d),
                    LayerSpec::Gelu,
                    LayerSpec::Dropout(p),
                    LayerSpec::Linear(1),
                ],
            )
        };
        let net = match kind {
            ModelKind::ProstT5Only => single(config.protein_dim, "mlp_protein"),
            ModelKind::BacformerOnly => single(config.genome_dim, "mlp_genome"),
            ModelKind::ConcatMlp => {
                let (h1, h2) = config.concat_hidden_dims;
                Mlp::build(
                    "mlp_concat",
                    seed,
                    config.protein_dim + config.genome_dim,
                    &[
                        LayerSpec::Norm,
                        LayerSpec::Linear(h1),
                        LayerSpec::Gelu,
                        LayerSpec::Dropout(p),
                        LayerSpec::Linear(h2),
                        LayerSpec::Gelu,
                        LayerSpec::Dropout(p),
                        LayerSpec::Linear(1),
                    ],
                )
            }
            ModelKind::MicroFuse => {
                return Err(Error::InvalidConfig(
                    "microfuse is not a baseline architecture".into(),
                ))
            }
        };
        Ok(BaselineModel {
            kind,
            config: config.clone(),
            seed,
            net,
        })
    }

    fn select_input(&self, x_protein: &Matrix<T>, x_genome: &Matrix<T>) -> Result<Matrix<T>> {
        if x_protein.rows() != x_genome.rows() {
            return Err(Error::ShapeMismatch {
                context: "modality batch sizes",
                expected: x_protein.shape(),
                got: x_genome.shape(),
            });
        }
        match self.kind {
            ModelKind::ProstT5Only => Ok(x_protein.clone()),
            ModelKind::BacformerOnly => Ok(x_genome.clone()),
            ModelKind::ConcatMlp => Matrix::concat_cols(&[x_protein, x_genome]),
            ModelKind::MicroFuse => unreachable!(),
        }
    }

    pub fn forward_probs(&self, x_protein: &Matrix<T>, x_genome: &Matrix<T>) -> Result<Vec<T>> {
        let input = self.select_input(x_protein, x_genome)?;
        let out = self.net.forward_eval(&input)?;
        Ok((0..out.rows()).map(|r| sigmoid_scalar(out.get(r, 0))).collect())
    }

    pub fn forward_train(
        &self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<(Vec<T>, MlpCache<T>)> {
        let input = self.select_input(x_protein, x_genome)?;
        let (out, cache) = self.net.forward(&input, mode, step)?;
        Ok(((0..out.rows()).map(|r| out.get(r, 0)).collect(), cache))
    }

    pub fn backward(&mut self, cache: &MlpCache<T>, grad_logit: &[T]) -> Result<()> {
        let grad = Matrix::from_fn(grad_logit.len(), 1, |r, _| grad_logit[r]);
        self.net.backward(cache, &grad)?;
        Ok(())
    }
}

impl<T: Real> Parameterized<T> for BaselineModel<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.net.visit_params(f);
    }
}
