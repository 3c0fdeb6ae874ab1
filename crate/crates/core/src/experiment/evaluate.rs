//! Checkpoint evaluation: default-threshold and validation-selected-
//! threshold metric reports, the hard conflict subset, and router
//! diagnostics.

use crate::data::{hard_subset, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{
    metric_report, select_threshold, threshold_sweep, MetricReport, ScoredSet,
};
use crate::model::{AnyModel, ExpertKind};
use crate::nn::Mode;

use super::dataset::Dataset;
use super::train::score_rows;

#[derive(Debug, Clone)]
pub struct SplitEval {
    pub split: Split,
    /// Metrics at the 0.5 default threshold.
    pub default_report: MetricReport<f64>,
    /// Metrics at the validation-selected threshold.
    pub selected_report: MetricReport<f64>,
    pub selected_threshold: f64,
    pub n: usize,
}

/// Scores for a split as a ScoredSet.
pub fn score_split(model: &AnyModel<f64>, dataset: &Dataset, split: Split) -> Result<ScoredSet<f64>> {
    let view = dataset.view(split);
    let scores = score_rows(model, dataset, &view.rows)?;
    ScoredSet::new(scores, view.labels.clone())
}

/// Both threshold policies on one split. The selected threshold always
/// comes from the validation sweep, never from the evaluated split.
pub fn evaluate(
    model: &AnyModel<f64>,
    dataset: &Dataset,
    split: Split,
    sweep_resolution: usize,
) -> Result<SplitEval> {
    let val_scored = score_split(model, dataset, Split::Val)?;
    let sweep = threshold_sweep(&val_scored, sweep_resolution)?;
    let t_star = select_threshold(&sweep);
    let scored = score_split(model, dataset, split)?;
    Ok(SplitEval {
        split,
        default_report: metric_report(&scored, 0.5)?,
        selected_report: metric_report(&scored, t_star)?,
        selected_threshold: t_star,
        n: scored.len(),
    })
}

/// Hard sequence-conflict subset of the test split, evaluated at both
/// thresholds. Requires identities and at least 4 pairs per class.
pub fn evaluate_hard_subset(
    model: &AnyModel<f64>,
    dataset: &Dataset,
    sweep_resolution: usize,
) -> Result<SplitEval> {
    let view = dataset.view(Split::Test);
    let identities = view.identities.as_ref().ok_or_else(|| {
        Error::Domain("hard subset evaluation requires per-pair identities".into())
    })?;
    let keep = hard_subset(identities, &view.labels)?;
    let rows: Vec<usize> = keep.iter().map(|&i| view.rows[i]).collect();
    let labels: Vec<u8> = keep.iter().map(|&i| view.labels[i]).collect();
    let scores = score_rows(model, dataset, &rows)?;
    let scored = ScoredSet::new(scores, labels)?;

    let val_scored = score_split(model, dataset, Split::Val)?;
    let sweep = threshold_sweep(&val_scored, sweep_resolution)?;
    let t_star = select_threshold(&sweep);
    Ok(SplitEval {
        split: Split::Test,
        default_report: metric_report(&scored, 0.5)?,
        selected_report: metric_report(&scored, t_star)?,
        selected_threshold: t_star,
        n: scored.len(),
    })
}

/// Mean router weight per expert over a split. Only the fusion model has a
/// router.
pub fn router_diagnostics(
    model: &AnyModel<f64>,
    dataset: &Dataset,
    split: Split,
) -> Result<Vec<(ExpertKind, f64)>> {
    let fusion = match model {
        AnyModel::Fusion(m) => m,
        AnyModel::Baseline(b) => {
            return Err(Error::InvalidConfig(format!(
                "router diagnostics are unsupported for the {} model",
                b.kind.name()
            )))
        }
    };
    let view = dataset.view(split);
    let kinds = fusion.expert_kinds();
    let mut sums = vec![0.0f64; kinds.len()];
    let mut count = 0usize;
    for chunk in view.rows.chunks(2048) {
        let (xp, xb) = dataset.gather(chunk);
        let trace = fusion.full_forward(&xp, &xb, Mode::Eval, 0)?;
        for r in 0..trace.router_weights.rows() {
            for (k, s) in sums.iter_mut().enumerate() {
                *s += trace.router_weights.get(r, k);
            }
        }
        count += chunk.len();
    }
    Ok(kinds
        .into_iter()
        .zip(sums)
        .map(|(k, s)| (k, s / count as f64))
        .collect())
}

/// Fused representations for a row list (retrieval input).
pub fn fused_rows(model: &AnyModel<f64>, dataset: &Dataset, rows: &[usize]) -> Result<Matrix<f64>> {
    let fusion = match model {
        AnyModel::Fusion(m) => m,
        AnyModel::Baseline(b) => {
            return Err(Error::InvalidConfig(format!(
                "fused representations are unsupported for the {} model",
                b.kind.name()
            )))
        }
    };
    let d = fusion.config.latent_dim;
    let mut out = Matrix::zeros(rows.len(), d);
    let mut offset = 0;
    for chunk in rows.chunks(2048) {
        let (xp, xb) = dataset.gather(chunk);
        let fused = fusion.fused_representations(&xp, &xb)?;
        for r in 0..fused.rows() {
            out.row_mut(offset + r).copy_from_slice(fused.row(r));
        }
        offset += chunk.len();
    }
    Ok(out)
}
