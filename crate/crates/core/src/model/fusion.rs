//! The MicroFuse network: two modality projections, up to four experts,
//! a soft router over the joint representation, and a fused classifier.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::nn::mlp::{LayerSpec, Mlp, MlpCache};
use crate::nn::{sigmoid_scalar, softmax_rows, softmax_rows_backward, Mode, Param, Parameterized};
use crate::scalar::Real;

use super::{ExpertKind, FusionConfig};

/// All activations a caller may want to inspect after a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub z_protein: Matrix<T>,
    pub z_genome: Matrix<T>,
    pub expert_kinds: Vec<ExpertKind>,
    pub expert_outputs: Vec<Matrix<T>>,
    /// B x K soft router weights; each row is a probability simplex point.
    pub router_weights: Matrix<T>,
    pub fused: Matrix<T>,
    pub logits: Vec<T>,
    pub probabilities: Vec<T>,
}

/// Layer caches from a training forward pass.
pub struct FusionCache<T> {
    proj_protein: MlpCache<T>,
    proj_genome: MlpCache<T>,
    expert_caches: Vec<MlpCache<T>>,
    router_cache: MlpCache<T>,
    classifier_cache: MlpCache<T>,
}

#[derive(Debug, Clone)]
pub struct FusionModel<T> {
    pub config: FusionConfig,
    pub seed: u64,
    pub project_protein: Mlp<T>,
    pub project_genome: Mlp<T>,
    pub experts: Vec<(ExpertKind, Mlp<T>)>,
    pub router: Mlp<T>,
    pub classifier: Mlp<T>,
}

/// Interaction-expert input features:
/// agreement sees [z_p .* z_b ; |z_p .* z_b|], conflict sees
/// [|z_p - z_b| ; z_p - z_b].
pub fn interaction_features<T: Real>(
    z_protein: &Matrix<T>,
    z_genome: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let product = z_protein.hadamard(z_genome);
    let product_abs = product.map(|v| v.abs());
    let diff = z_protein.sub(z_genome);
    let diff_abs = diff.map(|v| v.abs());
    Ok((
        Matrix::concat_cols(&[&product, &product_abs])?,
        Matrix::concat_cols(&[&diff_abs, &diff])?,
    ))
}

/// Subgradient sign with sign(0) = 0, used when backpropagating |x|.
fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl<T: Real> FusionModel<T> {
    pub fn new(config: &FusionConfig, kinds: &[ExpertKind], seed: u64) -> Result<Self> {
        config.validate()?;
        if kinds.is_empty() {
            return Err(Error::InvalidConfig("at least one expert required".into()));
        }
        let d = config.latent_dim;
        let p = config.dropout;
        let proj = |name: &str, in_dim: usize| {
            Mlp::build(
                name,
                seed,
                in_dim,
                &[
                    LayerSpec::Norm,
                    LayerSpec::Linear(d),
                    LayerSpec::Gelu,
                    LayerSpec::Dropout(p),
                ],
            )
        };
        let expert = |kind: ExpertKind| {
            let in_dim = match kind {
                ExpertKind::Protein | ExpertKind::Genome => d,
                ExpertKind::Agreement | ExpertKind::Conflict => 2 * d,
            };
            Mlp::build(
                &format!("expert_{}", kind.name()),
                seed,
                in_dim,
                &[
                    LayerSpec::Linear(config.expert_hidden_dim),
                    LayerSpec::Gelu,
                    LayerSpec::Dropout(p),
                    LayerSpec::Linear(d),
                ],
            )
        };
        Ok(FusionModel {
            config: config.clone(),
            seed,
            project_protein: proj("f_p", config.protein_dim),
            project_genome: proj("f_b", config.genome_dim),
            experts: kinds.iter().map(|&k| (k, expert(k))).collect(),
            router: Mlp::build(
                "router",
                seed,
                4 * d,
                &[
                    LayerSpec::Linear(config.router_hidden_dim),
                    LayerSpec::Gelu,
                    LayerSpec::Dropout(p),
                    LayerSpec::Linear(kinds.len()),
                ],
            ),
            classifier: Mlp::build(
                "classifier",
                seed,
                d,
                &[
                    LayerSpec::Linear(config.classifier_hidden_dim),
                    LayerSpec::Gelu,
                    LayerSpec::Dropout(p),
                    LayerSpec::Linear(1),
                ],
            ),
        })
    }

    pub fn expert_kinds(&self) -> Vec<ExpertKind> {
        self.experts.iter().map(|&(k, _)| k).collect()
    }

    fn check_batch(&self, x_protein: &Matrix<T>, x_genome: &Matrix<T>) -> Result<()> {
        if x_protein.cols() != self.config.protein_dim {
            return Err(Error::ShapeMismatch {
                context: "protein input width",
                expected: (x_protein.rows(), self.config.protein_dim),
                got: x_protein.shape(),
            });
        }
        if x_genome.cols() != self.config.genome_dim {
            return Err(Error::ShapeMismatch {
                context: "genome input width",
                expected: (x_genome.rows(), self.config.genome_dim),
                got: x_genome.shape(),
            });
        }
        if x_protein.rows() != x_genome.rows() {
            return Err(Error::ShapeMismatch {
                context: "modality batch sizes",
                expected: x_protein.shape(),
                got: x_genome.shape(),
            });
        }
        Ok(())
    }

    /// Project both modalities into the shared latent space.
    pub fn project(
        &self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<(Matrix<T>, Matrix<T>)> {
        self.check_batch(x_protein, x_genome)?;
        let (zp, _) = self.project_protein.forward(x_protein, mode, step)?;
        let (zb, _) = self.project_genome.forward(x_genome, mode, step)?;
        Ok((zp, zb))
    }

    /// Run every expert on the projected pair.
    pub fn expert_forward(
        &self,
        z_protein: &Matrix<T>,
        z_genome: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<Vec<Matrix<T>>> {
        let (feat_agr, feat_conf) = interaction_features(z_protein, z_genome)?;
        self.experts
            .iter()
            .map(|(kind, net)| {
                let input = match kind {
                    ExpertKind::Protein => z_protein,
                    ExpertKind::Genome => z_genome,
                    ExpertKind::Agreement => &feat_agr,
                    ExpertKind::Conflict => &feat_conf,
                };
                Ok(net.forward(input, mode, step)?.0)
            })
            .collect()
    }

    /// Router input [z_p ; z_b ; |z_p - z_b| ; z_p .* z_b].
    fn router_input(z_protein: &Matrix<T>, z_genome: &Matrix<T>) -> Result<Matrix<T>> {
        let diff_abs = z_protein.sub(z_genome).map(|v| v.abs());
        let product = z_protein.hadamard(z_genome);
        Matrix::concat_cols(&[z_protein, z_genome, &diff_abs, &product])
    }

    /// Soft routing weights over the active experts.
    pub fn route(
        &self,
        z_protein: &Matrix<T>,
        z_genome: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<Matrix<T>> {
        let input = Self::router_input(z_protein, z_genome)?;
        let (logits, _) = self.router.forward(&input, mode, step)?;
        Ok(softmax_rows(&logits))
    }

    /// Convex combination of expert outputs followed by the classifier head.
    pub fn fuse_and_classify(
        &self,
        expert_outputs: &[Matrix<T>],
        weights: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<(Matrix<T>, Vec<T>, Vec<T>)> {
        let fused = Self::fuse(expert_outputs, weights)?;
        let (logit_mat, _) = self.classifier.forward(&fused, mode, step)?;
        let logits: Vec<T> = (0..logit_mat.rows()).map(|r| logit_mat.get(r, 0)).collect();
        let probabilities = logits.iter().map(|&l| sigmoid_scalar(l)).collect();
        Ok((fused, logits, probabilities))
    }

    fn fuse(expert_outputs: &[Matrix<T>], weights: &Matrix<T>) -> Result<Matrix<T>> {
        let k = expert_outputs.len();
        if weights.cols() != k {
            return Err(Error::ShapeMismatch {
                context: "router weight count",
                expected: (weights.rows(), k),
                got: weights.shape(),
            });
        }
        let rows = weights.rows();
        let d = expert_outputs[0].cols();
        let mut fused = Matrix::zeros(rows, d);
        for r in 0..rows {
            let dst = fused.row_mut(r);
            for (j, h) in expert_outputs.iter().enumerate() {
                let w = weights.get(r, j);
                for (o, &hv) in dst.iter_mut().zip(h.row(r)) {
                    *o += w * hv;
                }
            }
        }
        Ok(fused)
    }

    /// Full evaluation/diagnostic forward pass.
    pub fn full_forward(
        &self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<ForwardTrace<T>> {
        Ok(self.forward_train(x_protein, x_genome, mode, step)?.0)
    }

    /// Forward pass that also returns the caches needed by `backward`.
    pub fn forward_train(
        &self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
        mode: Mode,
        step: u64,
    ) -> Result<(ForwardTrace<T>, FusionCache<T>)> {
        self.check_batch(x_protein, x_genome)?;
        let (z_protein, proj_protein) = self.project_protein.forward(x_protein, mode, step)?;
        let (z_genome, proj_genome) = self.project_genome.forward(x_genome, mode, step)?;

        let (feat_agr, feat_conf) = interaction_features(&z_protein, &z_genome)?;
        let mut expert_outputs = Vec::with_capacity(self.experts.len());
        let mut expert_caches = Vec::with_capacity(self.experts.len());
        for (kind, net) in &self.experts {
            let input = match kind {
                ExpertKind::Protein => &z_protein,
                ExpertKind::Genome => &z_genome,
                ExpertKind::Agreement => &feat_agr,
                ExpertKind::Conflict => &feat_conf,
            };
            let (out, cache) = net.forward(input, mode, step)?;
            expert_outputs.push(out);
            expert_caches.push(cache);
        }

        let router_in = Self::router_input(&z_protein, &z_genome)?;
        let (router_logits, router_cache) = self.router.forward(&router_in, mode, step)?;
        let router_weights = softmax_rows(&router_logits);

        let fused = Self::fuse(&expert_outputs, &router_weights)?;
        let (logit_mat, classifier_cache) = self.classifier.forward(&fused, mode, step)?;
        let logits: Vec<T> = (0..logit_mat.rows()).map(|r| logit_mat.get(r, 0)).collect();
        let probabilities: Vec<T> = logits.iter().map(|&l| sigmoid_scalar(l)).collect();

        Ok((
            ForwardTrace {
                z_protein,
                z_genome,
                expert_kinds: self.expert_kinds(),
                expert_outputs,
                router_weights,
                fused,
                logits,
                probabilities,
            },
            FusionCache {
                proj_protein,
                proj_genome,
                expert_caches,
                router_cache,
                classifier_cache,
            },
        ))
    }

    /// Backward pass. `grad_logit` is dL/dlogit per row; `grad_fused_extra`
    /// and the two `grad_z_*_extra` terms inject gradients that reach the
    /// fused representation or the projections directly (the contrastive
    /// objectives). Parameter gradients are accumulated in place.
    pub fn backward(
        &mut self,
        cache: &FusionCache<T>,
        trace: &ForwardTrace<T>,
        grad_logit: &[T],
        grad_fused_extra: Option<&Matrix<T>>,
        grad_z_protein_extra: &Matrix<T>,
        grad_z_genome_extra: &Matrix<T>,
    ) -> Result<()> {
        let batch = trace.fused.rows();
        let d = self.config.latent_dim;
        debug_assert_eq!(grad_logit.len(), batch);

        // Classifier head.
        let grad_logit_mat = Matrix::from_fn(batch, 1, |r, _| grad_logit[r]);
        let mut grad_fused = self
            .classifier
            .backward(&cache.classifier_cache, &grad_logit_mat)?;
        if let Some(extra) = grad_fused_extra {
            grad_fused.add_assign(extra);
        }

        // Fusion: h = sum_k w_k h_k.
        let k = self.experts.len();
        let mut grad_weights = Matrix::zeros(batch, k);
        let mut grad_experts: Vec<Matrix<T>> = Vec::with_capacity(k);
        for j in 0..k {
            let h_j = &trace.expert_outputs[j];
            let mut g = Matrix::zeros(batch, d);
            for r in 0..batch {
                let w = trace.router_weights.get(r, j);
                let gf = grad_fused.row(r);
                grad_weights.set(r, j, dot(gf, h_j.row(r)));
                for (o, &gv) in g.row_mut(r).iter_mut().zip(gf) {
                    *o = w * gv;
                }
            }
            grad_experts.push(g);
        }

        // Router through the softmax.
        let grad_router_logits = softmax_rows_backward(&trace.router_weights, &grad_weights);
        let grad_router_in = self.router.backward(&cache.router_cache, &grad_router_logits)?;
        let chunks = grad_router_in.split_cols(&[d, d, d, d])?;

        let zp = &trace.z_protein;
        let zb = &trace.z_genome;
        let mut grad_zp = grad_z_protein_extra.clone();
        let mut grad_zb = grad_z_genome_extra.clone();
        grad_zp.add_assign(&chunks[0]);
        grad_zb.add_assign(&chunks[1]);
        // |z_p - z_b| chunk.
        for r in 0..batch {
            let c3 = chunks[2].row(r);
            let c4 = chunks[3].row(r);
            let zpr = zp.row(r);
            let zbr = zb.row(r);
            let gp = grad_zp.row_mut(r);
            for i in 0..d {
                let s = sign(zpr[i] - zbr[i]);
                gp[i] += c3[i] * s + c4[i] * zbr[i];
            }
            let gb = grad_zb.row_mut(r);
            for i in 0..d {
                let s = sign(zpr[i] - zbr[i]);
                gb[i] += -(c3[i] * s) + c4[i] * zpr[i];
            }
        }

        // Experts.
        for (j, (kind, net)) in self.experts.iter_mut().enumerate() {
            let grad_in = net.backward(&cache.expert_caches[j], &grad_experts[j])?;
            match kind {
                ExpertKind::Protein => grad_zp.add_assign(&grad_in),
                ExpertKind::Genome => grad_zb.add_assign(&grad_in),
                ExpertKind::Agreement => {
                    let parts = grad_in.split_cols(&[d, d])?;
                    for r in 0..batch {
                        let da1 = parts[0].row(r);
                        let da2 = parts[1].row(r);
                        let zpr = zp.row(r);
                        let zbr = zb.row(r);
                        let gp = grad_zp.row_mut(r);
                        for i in 0..d {
                            let da = da1[i] + da2[i] * sign(zpr[i] * zbr[i]);
                            gp[i] += da * zbr[i];
                        }
                        let gb = grad_zb.row_mut(r);
                        for i in 0..d {
                            let da = da1[i] + da2[i] * sign(zpr[i] * zbr[i]);
                            gb[i] += da * zpr[i];
                        }
                    }
                }
                ExpertKind::Conflict => {
                    let parts = grad_in.split_cols(&[d, d])?;
                    for r in 0..batch {
                        let dc1 = parts[0].row(r);
                        let dc2 = parts[1].row(r);
                        let zpr = zp.row(r);
                        let zbr = zb.row(r);
                        let gp = grad_zp.row_mut(r);
                        for i in 0..d {
                            let dv = dc1[i] * sign(zpr[i] - zbr[i]) + dc2[i];
                            gp[i] += dv;
                        }
                        let gb = grad_zb.row_mut(r);
                        for i in 0..d {
                            let dv = dc1[i] * sign(zpr[i] - zbr[i]) + dc2[i];
                            gb[i] -= dv;
                        }
                    }
                }
            }
        }

        // Projections.
        self.project_protein.backward(&cache.proj_protein, &grad_zp)?;
        self.project_genome.backward(&cache.proj_genome, &grad_zb)?;
        Ok(())
    }

    /// Fused representations in eval mode (retrieval / diagnostics).
    pub fn fused_representations(
        &self,
        x_protein: &Matrix<T>,
        x_genome: &Matrix<T>,
    ) -> Result<Matrix<T>> {
        Ok(self.full_forward(x_protein, x_genome, Mode::Eval, 0)?.fused)
    }
}

impl<T: Real> Parameterized<T> for FusionModel<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.project_protein.visit_params(f);
        self.project_genome.visit_params(f);
        for (_, net) in &mut self.experts {
            net.visit_params(f);
        }
        self.router.visit_params(f);
        self.classifier.visit_params(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::normal_cdf;
    use crate::rng::Stream;

    fn toy_config() -> FusionConfig {
        let mut c = FusionConfig::with_dims(7, 5, 4);
        c.dropout = 0.2;
        c
    }

    fn toy_model() -> FusionModel<f64> {
        FusionModel::new(&toy_config(), &ExpertKind::ALL, 99).unwrap()
    }

    fn random_inputs(rng: &mut Stream, batch: usize, cfg: &FusionConfig) -> (Matrix<f64>, Matrix<f64>) {
        (
            Matrix::from_fn(batch, cfg.protein_dim, |_, _| rng.next_range(-1.0, 1.0)),
            Matrix::from_fn(batch, cfg.genome_dim, |_, _| rng.next_range(-1.0, 1.0)),
        )
    }

    #[test]
    fn projection_is_deterministic_in_eval_mode() {
        let m = toy_model();
        let xp = Matrix::<f64>::zeros(1, 7);
        let xb = Matrix::<f64>::zeros(1, 5);
        let (a_p, a_b) = m.project(&xp, &xb, Mode::Eval, 0).unwrap();
        let (b_p, b_b) = m.project(&xp, &xb, Mode::Eval, 123).unwrap();
        assert_eq!(a_p, b_p);
        assert_eq!(a_b, b_b);
    }

    #[test]
    fn projection_train_mode_is_reproducible_per_step() {
        let m = toy_model();
        let mut rng = Stream::new(1, &["proj"]);
        let (xp, xb) = random_inputs(&mut rng, 3, &m.config);
        let a = m.project(&xp, &xb, Mode::Train, 5).unwrap();
        let b = m.project(&xp, &xb, Mode::Train, 5).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn projection_matches_hand_computed_chain() {
        // 2-dim input, 2-dim latent, hand-set weights, eval mode.
        let mut cfg = FusionConfig::with_dims(2, 2, 2);
        cfg.dropout = 0.0;
        let mut m = FusionModel::<f64>::new(&cfg, &ExpertKind::ALL, 7).unwrap();
        // Set f_p's Linear to a known weight/bias.
        if let crate::nn::mlp::Layer::Linear(l) = &mut m.project_protein.layers_mut()[1] {
            l.weight.value = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
            l.bias.value = Matrix::from_rows(&[vec![0.1, -0.2]]).unwrap();
        } else {
            panic!("layer 1 should be linear");
        }
        let x = Matrix::from_rows(&[vec![3.0, 1.0]]).unwrap();
        let (zp, _) = m
            .project(&x, &Matrix::zeros(1, 2), Mode::Eval, 0)
            .unwrap();
        // LayerNorm of [3, 1]: mean 2, var 1 -> [1, -1] / sqrt(1 + 1e-5).
        let s = 1.0 / (1.0 + 1e-5_f64).sqrt();
        let ln = [s, -s];
        let pre = [
            1.0 * ln[0] + 2.0 * ln[1] + 0.1,
            -1.0 * ln[0] + 0.5 * ln[1] - 0.2,
        ];
        for (i, &p) in pre.iter().enumerate() {
            let want = p * normal_cdf(p);
            assert!((zp.get(0, i) - want).abs() < 1e-12, "{} vs {want}", zp.get(0, i));
        }
    }

    #[test]
    fn conflict_features_vanish_when_projections_agree() {
        let mut rng = Stream::new(2, &["feat"]);
        let z = Matrix::from_fn(4, 3, |_, _| rng.next_range(-1.0, 1.0));
        let (_, feat_conf) = interaction_features(&z, &z).unwrap();
        assert!(feat_conf.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn agreement_halves_coincide_for_nonnegative_products() {
        let zp = Matrix::from_rows(&[vec![0.5, -0.3, 2.0]]).unwrap();
        let zb = Matrix::from_rows(&[vec![0.4, -0.6, 0.1]]).unwrap();
        let (feat_agr, _) = interaction_features(&zp, &zb).unwrap();
        for i in 0..3 {
            assert_eq!(feat_agr.get(0, i), feat_agr.get(0, i + 3));
        }
    }

    #[test]
    fn interaction_features_match_elementwise_oracle() {
        let mut rng = Stream::new(3, &["feat_oracle"]);
        let zp = Matrix::from_fn(2, 3, |_, _| rng.next_range(-2.0, 2.0));
        let zb = Matrix::from_fn(2, 3, |_, _| rng.next_range(-2.0, 2.0));
        let (agr, conf) = interaction_features(&zp, &zb).unwrap();
        for r in 0..2 {
            for i in 0..3 {
                let prod = zp.get(r, i) * zb.get(r, i);
                let diff = zp.get(r, i) - zb.get(r, i);
                assert_eq!(agr.get(r, i), prod);
                assert_eq!(agr.get(r, i + 3), prod.abs());
                assert_eq!(conf.get(r, i), diff.abs());
                assert_eq!(conf.get(r, i + 3), diff);
            }
        }
    }

    #[test]
    fn zeroed_router_head_routes_uniformly() {
        let mut m = toy_model();
        m.router.zero_last_linear();
        let mut rng = Stream::new(4, &["route"]);
        let (xp, xb) = random_inputs(&mut rng, 5, &m.config);
        let (zp, zb) = m.project(&xp, &xb, Mode::Eval, 0).unwrap();
        let w = m.route(&zp, &zb, Mode::Eval, 0).unwrap();
        for r in 0..5 {
            for k in 0..4 {
                assert!((w.get(r, k) - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn router_bias_gives_closed_form_softmax() {
        let mut m = toy_model();
        m.router.zero_last_linear();
        if let crate::nn::mlp::Layer::Linear(l) = m.router.layers_mut().last_mut().unwrap() {
            l.bias.value = Matrix::from_rows(&[vec![(8.0_f64).ln(), 0.0, 0.0, 0.0]]).unwrap();
        }
        let mut rng = Stream::new(5, &["route_bias"]);
        let (xp, xb) = random_inputs(&mut rng, 2, &m.config);
        let (zp, zb) = m.project(&xp, &xb, Mode::Eval, 0).unwrap();
        let w = m.route(&zp, &zb, Mode::Eval, 0).unwrap();
        for r in 0..2 {
            assert!((w.get(r, 0) - 8.0 / 11.0).abs() < 1e-12);
            for k in 1..4 {
                assert!((w.get(r, k) - 1.0 / 11.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn router_rows_are_simplex_points() {
        let m = toy_model();
        let mut rng = Stream::new(6, &["route_simplex"]);
        let (xp, xb) = random_inputs(&mut rng, 64, &m.config);
        let (zp, zb) = m.project(&xp, &xb, Mode::Eval, 0).unwrap();
        let w = m.route(&zp, &zb, Mode::Eval, 0).unwrap();
        for r in 0..64 {
            let sum: f64 = w.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(w.row(r).iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn one_hot_weights_select_a_single_expert() {
        let m = toy_model();
        let mut rng = Stream::new(7, &["fuse"]);
        let (xp, xb) = random_inputs(&mut rng, 3, &m.config);
        let (zp, zb) = m.project(&xp, &xb, Mode::Eval, 0).unwrap();
        let outs = m.expert_forward(&zp, &zb, Mode::Eval, 0).unwrap();
        let w = Matrix::from_fn(3, 4, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let (fused, _, _) = m.fuse_and_classify(&outs, &w, Mode::Eval, 0).unwrap();
        assert_eq!(fused, outs[0]);
    }

    #[test]
    fn equal_expert_outputs_are_fixed_points_of_fusion() {
        let m = toy_model();
        let mut rng = Stream::new(8, &["fuse_eq"]);
        let h = Matrix::from_fn(3, 4, |_, _| rng.next_range(-1.0, 1.0));
        let outs = vec![h.clone(), h.clone(), h.clone(), h.clone()];
        let mut w = Matrix::from_fn(3, 4, |_, _| rng.next_range(0.0, 1.0));
        for r in 0..3 {
            let sum: f64 = w.row(r).iter().sum();
            for v in w.row_mut(r) {
                *v /= sum;
            }
        }
        let (fused, _, _) = m.fuse_and_classify(&outs, &w, Mode::Eval, 0).unwrap();
        for (a, b) in fused.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_matches_weighted_sum_oracle() {
        let m = toy_model();
        let mut rng = Stream::new(9, &["fuse_oracle"]);
        let (xp, xb) = random_inputs(&mut rng, 2, &m.config);
        let trace = m.full_forward(&xp, &xb, Mode::Eval, 0).unwrap();
        for r in 0..2 {
            for i in 0..m.config.latent_dim {
                let mut want = 0.0;
                for k in 0..4 {
                    want += trace.router_weights.get(r, k) * trace.expert_outputs[k].get(r, i);
                }
                assert!((trace.fused.get(r, i) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_are_strictly_inside_unit_interval() {
        let m = toy_model();
        let mut rng = Stream::new(10, &["probs"]);
        let (xp, xb) = random_inputs(&mut rng, 16, &m.config);
        let trace = m.full_forward(&xp, &xb, Mode::Eval, 0).unwrap();
        assert!(trace.probabilities.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn repeated_eval_traces_are_identical() {
        let m = toy_model();
        let mut rng = Stream::new(11, &["trace"]);
        let (xp, xb) = random_inputs(&mut rng, 4, &m.config);
        let a = m.full_forward(&xp, &xb, Mode::Eval, 0).unwrap();
        let b = m.full_forward(&xp, &xb, Mode::Eval, 7).unwrap();
        assert_eq!(a.probabilities, b.probabilities);
        assert_eq!(a.fused, b.fused);
    }

    #[test]
    fn full_model_gradients_check_out_against_finite_differences() {
        use crate::losses::LossConfig;
        use crate::model::AnyModel;
        use crate::nn::gradcheck::grad_check;

        let mut rng = Stream::new(15, &["full_gc"]);
        let cfg = toy_config();
        let batch = 6;
        let (xp, xb) = random_inputs(&mut rng, batch, &cfg);
        let labels: Vec<u8> = (0..batch).map(|i| (i % 2) as u8).collect();

        // BCE only, then the combined objective with amplified contrastive
        // weights so those gradient paths dominate coordinates they touch.
        let bce_only = LossConfig {
            lambda_xmod: 0.0,
            lambda_supcon: 0.0,
            ..LossConfig::<f64>::default()
        };
        let amplified = LossConfig {
            lambda_xmod: 0.7,
            lambda_supcon: 0.9,
            ..LossConfig::<f64>::default()
        };
        for (loss_cfg, tol, label) in [(bce_only, 1e-3, "bce"), (amplified, 1e-3, "combined")] {
            let mut model = AnyModel::Fusion(toy_model());
            model
                .train_batch(&xp, &xb, &labels, &loss_cfg, Mode::Eval, 0)
                .unwrap();
            let report = grad_check(
                &mut model,
                |m| m.loss_only(&xp, &xb, &labels, &loss_cfg).unwrap().total,
                1e-5,
            );
            assert!(
                report.max_rel_err < tol,
                "{label}: max rel err {} at {}",
                report.max_rel_err,
                report.worst
            );
        }
    }

    #[test]
    fn baseline_gradients_check_out() {
        use crate::losses::LossConfig;
        use crate::model::{AnyModel, ModelKind};
        use crate::nn::gradcheck::grad_check;

        let mut rng = Stream::new(16, &["base_gc"]);
        let cfg = toy_config();
        let (xp, xb) = random_inputs(&mut rng, 5, &cfg);
        let labels = [1u8, 0, 1, 1, 0];
        let loss_cfg = LossConfig::<f64>::default();
        for kind in [ModelKind::ProstT5Only, ModelKind::BacformerOnly, ModelKind::ConcatMlp] {
            let mut model = AnyModel::<f64>::build(kind, &cfg, 5).unwrap();
            model
                .train_batch(&xp, &xb, &labels, &loss_cfg, Mode::Eval, 0)
                .unwrap();
            let report = grad_check(
                &mut model,
                |m| m.loss_only(&xp, &xb, &labels, &loss_cfg).unwrap().total,
                1e-5,
            );
            assert!(
                report.max_rel_err < 1e-3,
                "{kind:?}: max rel err {} at {}",
                report.max_rel_err,
                report.worst
            );
        }
    }

    #[test]
    fn same_seed_builds_bit_identical_models() {
        let mut a = toy_model();
        let mut b = toy_model();
        let mut params_a = Vec::new();
        a.visit_params(&mut |n, p| params_a.push((n.to_string(), p.value.clone())));
        let mut i = 0;
        b.visit_params(&mut |n, p| {
            assert_eq!(params_a[i].0, n);
            assert_eq!(params_a[i].1, p.value);
            i += 1;
        });
        assert_eq!(i, params_a.len());
    }
}
