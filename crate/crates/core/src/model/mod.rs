//! The fusion network, the three baseline architectures, and the model
//! checkpoint format.

pub mod baseline;
pub mod checkpoint;
pub mod fusion;

pub use baseline::BaselineModel;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use fusion::{interaction_features, ForwardTrace, FusionModel};

use crate::error::{Error, Result};
use crate::losses::{bce_loss, disagreement_supcon, total_loss, xmod_infonce, LossConfig, LossReport};
use crate::matrix::Matrix;
use crate::nn::{Mode, Param, Parameterized};
use crate::scalar::Real;

/// Architecture dimensions shared by the fusion model and the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub protein_dim: usize,
    pub genome_dim: usize,
    pub latent_dim: usize,
    pub dropout: f64,
    pub expert_hidden_dim: usize,
    pub router_hidden_dim: usize,
    pub classifier_hidden_dim: usize,
    /// Hidden widths of the concat-MLP baseline.
    pub concat_hidden_dims: (usize, usize),
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig::with_dims(3072, 960, 512)
    }
}

impl FusionConfig {
    /// Hidden widths default to the latent width; the concat baseline gets
    /// (2d, d/2) hidden layers, which is (1024, 256) at the default d=512.
    pub fn with_dims(protein_dim: usize, genome_dim: usize, latent_dim: usize) -> Self {
        FusionConfig {
            protein_dim,
            genome_dim,
            latent_dim,
            dropout: 0.20,
            expert_hidden_dim: latent_dim,
            router_hidden_dim: latent_dim,
            classifier_hidden_dim: latent_dim,
            concat_hidden_dims: (2 * latent_dim, (latent_dim / 2).max(8)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.protein_dim,
            self.genome_dim,
            self.latent_dim,
            self.expert_hidden_dim,
            self.router_hidden_dim,
            self.classifier_hidden_dim,
            self.concat_hidden_dims.0,
            self.concat_hidden_dims.1,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("all model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// The four experts, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpertKind {
    Protein,
    Genome,
    Agreement,
    Conflict,
}

impl ExpertKind {
    pub const ALL: [ExpertKind; 4] = [
        ExpertKind::Protein,
        ExpertKind::Genome,
        ExpertKind::Agreement,
        ExpertKind::Conflict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExpertKind::Protein => "protein",
            ExpertKind::Genome => "genome",
            ExpertKind::Agreement => "agreement",
            ExpertKind::Conflict => "conflict",
        }
    }
}

/// Which architecture a checkpoint or experiment cell uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    MicroFuse,
    ProstT5Only,
    BacformerOnly,
    ConcatMlp,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "microfuse" => Ok(ModelKind::MicroFuse),
            "prostt5-only" | "prostt5_only" => Ok(ModelKind::ProstT5Only),
            "bacformer-only" | "bacformer_only" => Ok(ModelKind::BacformerOnly),
            "concat-mlp" | "concat_mlp" => Ok(ModelKind::ConcatMlp),
            other => Err(Error::InvalidConfig(format!("unknown model kind `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MicroFuse => "microfuse",
            ModelKind::ProstT5Only => "prostt5-only",
            ModelKind::BacformerOnly => "bacformer-only",
            ModelKind::ConcatMlp => "concat-mlp",
        }
    }
}

/// A trainable pair classifier: either the fusion model or a baseline.
#[derive(Debug, Clone)]
pub enum AnyModel<T> {
    Fusion(FusionModel<T>),
    Baseline(BaselineModel<T>),
}

impl<T: Real> AnyModel<T> {
    /// Build a model of the given kind. MicroFuse gets all four experts;
    /// use [`AnyModel::fusion_with_experts`] for expert ablations.
    pub fn build(kind: ModelKind, config: &FusionConfig, seed: u64) -> Result<Self> {
        match kind {
            ModelKind::MicroFuse => Ok(AnyModel::Fusion(FusionModel::new(
                config,
                &ExpertKind::ALL,
                seed,
            )?)),
            _ => Ok(AnyModel::Baseline(BaselineModel::new(kind, config, seed)?)),
        }
    }

    pub fn fusion_with_experts(
        config: &FusionConfig,
        kinds: &[ExpertKind],
        seed: u64,
    ) -> Result<Self> {
        Ok(AnyModel::Fusion(FusionModel::new(config, kinds, seed)?))
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Fusion(_) => ModelKind::MicroFuse,
            AnyModel::Baseline(b) => b.kind,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            AnyModel::Fusion(m) => m.seed,
            AnyModel::Baseline(b) => b.seed,
        }
    }

    pub fn config(&self) -> &FusionConfig {
        match self {
            AnyModel::Fusion(m) => &m.config,
            AnyModel::Baseline(b) => &b.config,
        }
    }

    /// Deterministic evaluation forward: per-row probabilities.
    pub fn forward_probs(&self, x_protein: &Matrix<T>, x_genome: &Matrix<T>) -> Result<Vec<T>> {
        match self {
            AnyModel::Fusion(m) => Ok(m.full_forward(x_protein, x_genome, Mode::Eval, 0)?.probabilities),
            AnyModel::Baseline(b) => b.forward_probs(x_protein, x_genome),
        }
    }

    /// One training step: zeroes gradients, runs forward in the given mode,
    /// computes the applicable objectives, and accumulates the combined
    /// gradient. Baselines train with binary cross-entropy only.
    pub fn train_batch(
        &mut self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
        labels: &[u8],
        loss_cfg: &LossConfig<T>,
        mode: Mode,
        step: u64,
    ) -> Result<LossReport<T>> {
        self.zero_grads();
        match self {
            AnyModel::Baseline(b) => {
                let (logits, cache) = b.forward_train(x_protein, x_genome, mode, step)?;
                let probs: Vec<T> = logits.iter().map(|&l| crate::nn::sigmoid_scalar(l)).collect();
                let bce = bce_loss(&probs, labels)?;
                b.backward(&cache, &bce.grad_logit)?;
                Ok(total_loss(bce.loss, T::zero(), T::zero(), labels.len(), loss_cfg))
            }
            AnyModel::Fusion(m) => {
                let (trace, cache) = m.forward_train(x_protein, x_genome, mode, step)?;
                let bce = bce_loss(&trace.probabilities, labels)?;
                let batch = labels.len();

                let mut xmod_value = T::zero();
                let mut supcon_value = T::zero();
                let mut grad_h_extra: Option<Matrix<T>> = None;
                let mut grad_zp_extra = Matrix::zeros(batch, m.config.latent_dim);
                let mut grad_zb_extra = Matrix::zeros(batch, m.config.latent_dim);

                if loss_cfg.lambda_xmod > T::zero() {
                    let nce = xmod_infonce(&trace.z_protein, &trace.z_genome, loss_cfg.tau_xmod)?;
                    xmod_value = nce.loss;
                    let mut gp = nce.grad_z_protein;
                    gp.scale(loss_cfg.lambda_xmod);
                    grad_zp_extra.add_assign(&gp);
                    let mut gb = nce.grad_z_genome;
                    gb.scale(loss_cfg.lambda_xmod);
                    grad_zb_extra.add_assign(&gb);
                }
                if loss_cfg.lambda_supcon > T::zero() && batch >= 2 {
                    let sup = disagreement_supcon(
                        &trace.fused,
                        labels,
                        &trace.z_protein,
                        &trace.z_genome,
                        loss_cfg.tau_supcon,
                        loss_cfg.disagreement_weighting,
                    )?;
                    supcon_value = sup.loss;
                    let mut gh = sup.grad_h;
                    gh.scale(loss_cfg.lambda_supcon);
                    grad_h_extra = Some(gh);
                    let mut gp = sup.grad_z_protein;
                    gp.scale(loss_cfg.lambda_supcon);
                    grad_zp_extra.add_assign(&gp);
                    let mut gb = sup.grad_z_genome;
                    gb.scale(loss_cfg.lambda_supcon);
                    grad_zb_extra.add_assign(&gb);
                }

                m.backward(
                    &cache,
                    &trace,
                    &bce.grad_logit,
                    grad_h_extra.as_ref(),
                    &grad_zp_extra,
                    &grad_zb_extra,
                )?;
                Ok(total_loss(bce.loss, xmod_value, supcon_value, batch, loss_cfg))
            }
        }
    }

    /// The combined objective evaluated without touching gradients
    /// (deterministic eval-mode forward). Used for logging and for
    /// finite-difference checks of `train_batch`'s gradients.
    pub fn loss_only(
        &self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
        labels: &[u8],
        loss_cfg: &LossConfig<T>,
    ) -> Result<LossReport<T>> {
        match self {
            AnyModel::Baseline(b) => {
                let probs = b.forward_probs(x_protein, x_genome)?;
                let bce = bce_loss(&probs, labels)?;
                Ok(total_loss(bce.loss, T::zero(), T::zero(), labels.len(), loss_cfg))
            }
            AnyModel::Fusion(m) => {
                let trace = m.full_forward(x_protein, x_genome, Mode::Eval, 0)?;
                let bce = bce_loss(&trace.probabilities, labels)?;
                let batch = labels.len();
                let xmod = if loss_cfg.lambda_xmod > T::zero() {
                    xmod_infonce(&trace.z_protein, &trace.z_genome, loss_cfg.tau_xmod)?.loss
                } else {
                    T::zero()
                };
                let supcon = if loss_cfg.lambda_supcon > T::zero() && batch >= 2 {
                    disagreement_supcon(
                        &trace.fused,
                        labels,
                        &trace.z_protein,
                        &trace.z_genome,
                        loss_cfg.tau_supcon,
                        loss_cfg.disagreement_weighting,
                    )?
                    .loss
                } else {
                    T::zero()
                };
                Ok(total_loss(bce.loss, xmod, supcon, batch, loss_cfg))
            }
        }
    }
}

impl<T: Real> Parameterized<T> for AnyModel<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        match self {
            AnyModel::Fusion(m) => m.visit_params(f),
            AnyModel::Baseline(b) => b.visit_params(f),
        }
    }
}
