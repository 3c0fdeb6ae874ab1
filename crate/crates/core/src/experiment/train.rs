//! The training loop: shuffled mini-batches, per-epoch validation AUROC,
//! best-checkpoint retention, and patience-based early stopping.

use crate::data::Split;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::metrics::{auroc, ScoredSet};
use crate::model::{AnyModel, ModelKind};
use crate::nn::{AdamW, Mode};
use crate::rng::Stream;

use super::config::{apply_ablation, ExperimentConfig};
use super::dataset::Dataset;

#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub bce: f64,
    pub xmod: f64,
    pub supcon: f64,
    pub total: f64,
    pub val_auroc: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// The best-validation-AUROC model, not the last one.
    pub model: AnyModel<f64>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_auroc: f64,
    pub epochs_run: usize,
    pub loss_config: LossConfig<f64>,
}

/// Batched eval-mode scores over a row list.
pub fn score_rows(model: &AnyModel<f64>, dataset: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(2048) {
        let (xp, xb) = dataset.gather(chunk);
        scores.extend(model.forward_probs(&xp, &xb)?);
    }
    Ok(scores)
}

fn build_model(config: &ExperimentConfig, seed: u64) -> Result<AnyModel<f64>> {
    if config.model == ModelKind::MicroFuse {
        let (experts, _) = apply_ablation(config.ablation, &config.loss);
        AnyModel::fusion_with_experts(&config.fusion, &experts, seed)
    } else {
        AnyModel::build(config.model, &config.fusion, seed)
    }
}

pub fn train(config: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let train_view = dataset.view(Split::Train);
    let val_view = dataset.view(Split::Val);
    if train_view.rows.is_empty() || val_view.rows.is_empty() {
        return Err(Error::Domain(
            "training requires nonempty train and val splits".into(),
        ));
    }
    if !val_view.labels.contains(&0) || !val_view.labels.contains(&1) {
        return Err(Error::Domain("val split must contain both classes".into()));
    }
    let (_, loss_cfg) = apply_ablation(config.ablation, &config.loss);
    let mut model = build_model(config, seed)?;
    let mut optimizer = AdamW::new(config.learning_rate, config.weight_decay);

    let n = train_view.rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(usize, f64, AnyModel<f64>)> = None;
    let mut log = Vec::new();
    let mut epochs_since_best = 0usize;
    let mut step: u64 = 0;

    for epoch in 1..=config.max_epochs {
        Stream::new(seed, &["shuffle", &epoch.to_string()]).shuffle(&mut order);
        let mut sums = [0.0f64; 4]; // bce, xmod, supcon, total
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let rows: Vec<usize> = chunk.iter().map(|&i| train_view.rows[i]).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_view.labels[i]).collect();
            let (xp, xb) = dataset.gather(&rows);
            let report = model
                .train_batch(&xp, &xb, &labels, &loss_cfg, Mode::Train, step)
                .map_err(|e| {
                    Error::NonFinite {
                        context: format!("epoch {epoch} batch {batches}: {e}"),
                    }
                })?;
            if !report.total.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("loss at epoch {epoch} batch {batches}"),
                });
            }
            optimizer.step(&mut model).map_err(|e| Error::NonFinite {
                context: format!("epoch {epoch} batch {batches}: {e}"),
            })?;
            sums[0] += report.bce;
            sums[1] += report.xmod;
            sums[2] += report.supcon;
            sums[3] += report.total;
            batches += 1;
        }

        let val_scores = score_rows(&model, dataset, &val_view.rows)?;
        let val_auroc = auroc(&ScoredSet::new(val_scores, val_view.labels.clone())?)?;
        let b = batches as f64;
        log.push(EpochLog {
            epoch,
            bce: sums[0] / b,
            xmod: sums[1] / b,
            supcon: sums[2] / b,
            total: sums[3] / b,
            val_auroc,
        });

        let improved = best.as_ref().map_or(true, |(_, auc, _)| val_auroc > *auc);
        if improved {
            best = Some((epoch, val_auroc, model.clone()));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    let (best_epoch, best_val_auroc, best_model) = best.expect("at least one epoch ran");
    let epochs_run = log.len();
    Ok(TrainOutcome {
        model: best_model,
        log,
        best_epoch,
        best_val_auroc,
        epochs_run,
        loss_config: loss_cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SplitFractions, SyntheticWorld};
    use crate::experiment::config::{AblationKind, DataSource};

    fn tiny_config(model: ModelKind, seed_count: usize) -> ExperimentConfig {
        let world = SyntheticWorld {
            seed: 31,
            protein_dim: 24,
            genome_dim: 16,
            latent_dim: 6,
            signal_channels: 4,
            signal_noise_protein: 0.3,
            signal_noise_genome: 0.45,
            observation_noise_protein: 0.4,
            observation_noise_genome: 0.4,
            ..SyntheticWorld::default()
        };
        let mut cfg = ExperimentConfig::desk_default();
        cfg.model = model;
        cfg.fusion = crate::model::FusionConfig::with_dims(24, 16, 16);
        cfg.batch_size = 128;
        cfg.max_epochs = 10;
        cfg.patience = 3;
        cfg.seeds = (1..=seed_count as u64).collect();
        cfg.data = DataSource::Synthetic {
            world,
            n_pairs: 1500,
            fractions: SplitFractions::default(),
            split_seed: 3,
        };
        cfg
    }

    #[test]
    fn separable_synthetic_data_trains_to_high_val_auroc() {
        let cfg = tiny_config(ModelKind::MicroFuse, 1);
        let dataset = Dataset::from_source(&cfg.data).unwrap();
        let outcome = train(&cfg, &dataset, 1).unwrap();
        assert!(
            outcome.best_val_auroc > 0.95,
            "val auroc {}",
            outcome.best_val_auroc
        );
        assert!(outcome.epochs_run <= cfg.max_epochs);
    }

    #[test]
    fn early_stopping_never_overruns_patience() {
        let cfg = tiny_config(ModelKind::ProstT5Only, 1);
        let dataset = Dataset::from_source(&cfg.data).unwrap();
        let outcome = train(&cfg, &dataset, 2).unwrap();
        assert!(outcome.epochs_run <= outcome.best_epoch + cfg.patience);
        // The reported best is the log maximum, and improvement is strict:
        // no later epoch beats it.
        let max = outcome
            .log
            .iter()
            .map(|e| e.val_auroc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(outcome.best_val_auroc, max);
        assert_eq!(outcome.log[outcome.best_epoch - 1].val_auroc, max);
    }

    #[test]
    fn identical_seed_and_config_reproduce_logs_and_weights() {
        let cfg = tiny_config(ModelKind::MicroFuse, 1);
        let dataset = Dataset::from_source(&cfg.data).unwrap();
        let a = train(&cfg, &dataset, 7).unwrap();
        let b = train(&cfg, &dataset, 7).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.total, y.total);
            assert_eq!(x.val_auroc, y.val_auroc);
        }
        let mut ma = a.model;
        let mut mb = b.model;
        let bytes_a = crate::model::checkpoint::checkpoint_bytes(&mut ma);
        let bytes_b = crate::model::checkpoint::checkpoint_bytes(&mut mb);
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn ce_only_ablation_trains_identically_to_pure_bce() {
        // The ce_only loss curve must equal a BCE-only run exactly: with the
        // lambdas at zero the contrastive terms are skipped, so the total is
        // the BCE value bit for bit.
        let mut cfg = tiny_config(ModelKind::MicroFuse, 1);
        cfg.ablation = AblationKind::CeOnly;
        let dataset = Dataset::from_source(&cfg.data).unwrap();
        let outcome = train(&cfg, &dataset, 3).unwrap();
        for entry in &outcome.log {
            assert_eq!(entry.total, entry.bce);
            assert_eq!(entry.xmod, 0.0);
            assert_eq!(entry.supcon, 0.0);
        }
    }
}
