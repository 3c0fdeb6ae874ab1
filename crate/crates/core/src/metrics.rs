//! Rank and threshold metrics for binary scored sets: AUROC (Mann-Whitney
//! with tie halving), step-interpolated average precision, two-class macro
//! AP, macro-F1 / macro-recall / accuracy at a threshold, Brier score, and
//! threshold sweeps with validation-side selection.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scores with binary labels; the input to every metric.
#[derive(Debug, Clone)]
pub struct ScoredSet<T> {
    scores: Vec<T>,
    labels: Vec<u8>,
}

impl<T: Real> ScoredSet<T> {
    pub fn new(scores: Vec<T>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() || scores.is_empty() {
            return Err(Error::Domain(format!(
                "scored set needs equal nonempty lengths, got {} scores / {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Domain(format!("labels must be 0/1, got {bad}")));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("scores must be finite".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted 1/2 (rank-based Mann-Whitney).
pub fn auroc<T: Real>(set: &ScoredSet<T>) -> Result<T> {
    let pos = set.positives();
    let neg = set.negatives();
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "auroc needs both classes, got {pos} positives / {neg} negatives"
        )));
    }
    let n = set.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].partial_cmp(&set.scores[b]).unwrap());
    // Average ranks over tie groups, 1-based.
    let mut rank_sum_pos = 0.0_f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if set.labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let pos_f = pos as f64;
    let u = rank_sum_pos - pos_f * (pos_f + 1.0) / 2.0;
    Ok(T::of(u / (pos_f * neg as f64)))
}

/// Step-interpolated average precision for the chosen class. Scores are
/// negated when `positive_class` is 0 so ranking is always by descending
/// evidence for the target. Tied scores form a single group evaluated at
/// the group's trailing precision.
pub fn average_precision<T: Real>(set: &ScoredSet<T>, positive_class: u8) -> Result<T> {
    let target_total = set
        .labels
        .iter()
        .filter(|&&y| y == positive_class)
        .count();
    if target_total == 0 {
        return Err(Error::UndefinedMetric(format!(
            "average_precision target class {positive_class} is absent"
        )));
    }
    let n = set.len();
    let keyed: Vec<T> = if positive_class == 1 {
        set.scores.clone()
    } else {
        set.scores.iter().map(|&s| -s).collect()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keyed[b].partial_cmp(&keyed[a]).unwrap());
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0_f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && keyed[order[j + 1]] == keyed[order[i]] {
            j += 1;
        }
        let group_tp = order[i..=j]
            .iter()
            .filter(|&&idx| set.labels[idx] == positive_class)
            .count();
        tp += group_tp;
        seen += j - i + 1;
        if group_tp > 0 {
            let precision = tp as f64 / seen as f64;
            let recall_gain = group_tp as f64 / target_total as f64;
            ap += precision * recall_gain;
        }
        i = j + 1;
    }
    Ok(T::of(ap))
}

/// Two-class macro AP: the mean of class-1 AP on the scores and class-0 AP
/// on the inverted scores.
pub fn map_macro<T: Real>(set: &ScoredSet<T>) -> Result<T> {
    if set.positives() == 0 || set.negatives() == 0 {
        return Err(Error::UndefinedMetric(
            "map_macro needs both classes present".into(),
        ));
    }
    let ap1 = average_precision(set, 1)?;
    let ap0 = average_precision(set, 0)?;
    Ok((ap1 + ap0) * T::of(0.5))
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdedMetrics<T> {
    pub macro_f1: T,
    pub macro_recall: T,
    pub accuracy: T,
    pub predicted_positive_rate: T,
}

/// Predict 1 iff score >= t; macro quantities average per-class values over
/// both classes, with zero-denominator F1 / recall defined as 0.
pub fn thresholded_metrics<T: Real>(set: &ScoredSet<T>, threshold: T) -> ThresholdedMetrics<T> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&s, &y) in set.scores.iter().zip(&set.labels) {
        let pred = s >= threshold;
        match (pred, y) {
            (true, 1) => tp += 1,
            (true, 0) => fp += 1,
            (false, 0) => tn += 1,
            (false, 1) => fn_ += 1,
            _ => unreachable!(),
        }
    }
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let prec1 = div(tp, tp + fp);
    let rec1 = div(tp, tp + fn_);
    let prec0 = div(tn, tn + fn_);
    let rec0 = div(tn, tn + fp);
    let n = set.len() as f64;
    ThresholdedMetrics {
        macro_f1: T::of((f1(prec1, rec1) + f1(prec0, rec0)) / 2.0),
        macro_recall: T::of((rec1 + rec0) / 2.0),
        accuracy: T::of((tp + tn) as f64 / n),
        predicted_positive_rate: T::of((tp + fp) as f64 / n),
    }
}

/// Mean squared error between scores and labels; requires scores in [0, 1].
pub fn brier<T: Real>(set: &ScoredSet<T>) -> Result<T> {
    if set
        .scores
        .iter()
        .any(|&s| s < T::zero() || s > T::one())
    {
        return Err(Error::Domain("brier requires scores in [0, 1]".into()));
    }
    let mut sum = T::zero();
    for (&s, &y) in set.scores.iter().zip(&set.labels) {
        let d = s - T::of(y as f64);
        sum += d * d;
    }
    Ok(sum / T::of(set.len() as f64))
}

#[derive(Debug, Clone)]
pub struct ThresholdSweep<T> {
    pub thresholds: Vec<T>,
    pub macro_f1: Vec<T>,
    pub accuracy: Vec<T>,
    pub predicted_positive_rate: Vec<T>,
}

/// Default sweep resolution: 199 interior points at 0.005 spacing.
pub const DEFAULT_SWEEP_RESOLUTION: usize = 199;

/// Evaluates thresholded metrics on a uniform interior grid
/// t_k = k / (resolution + 1), k = 1..=resolution.
pub fn threshold_sweep<T: Real>(set: &ScoredSet<T>, resolution: usize) -> Result<ThresholdSweep<T>> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "sweep resolution must be >= 2, got {resolution}"
        )));
    }
    let mut sweep = ThresholdSweep {
        thresholds: Vec::with_capacity(resolution),
        macro_f1: Vec::with_capacity(resolution),
        accuracy: Vec::with_capacity(resolution),
        predicted_positive_rate: Vec::with_capacity(resolution),
    };
    for k in 1..=resolution {
        let t = T::of(k as f64 / (resolution + 1) as f64);
        let m = thresholded_metrics(set, t);
        sweep.thresholds.push(t);
        sweep.macro_f1.push(m.macro_f1);
        sweep.accuracy.push(m.accuracy);
        sweep.predicted_positive_rate.push(m.predicted_positive_rate);
    }
    Ok(sweep)
}

/// argmax of validation macro-F1 over the sweep grid; ties break toward the
/// threshold closest to 0.5 (then toward the smaller threshold).
pub fn select_threshold<T: Real>(sweep: &ThresholdSweep<T>) -> T {
    let half = T::of(0.5);
    let mut best = 0usize;
    for k in 1..sweep.thresholds.len() {
        let better = sweep.macro_f1[k] > sweep.macro_f1[best];
        let tie = sweep.macro_f1[k] == sweep.macro_f1[best];
        let closer = (sweep.thresholds[k] - half).abs() < (sweep.thresholds[best] - half).abs();
        if better || (tie && closer) {
            best = k;
        }
    }
    sweep.thresholds[best]
}

/// Flat record of every evaluation metric at one threshold.
#[derive(Debug, Clone, Copy)]
pub struct MetricReport<T> {
    pub auroc: T,
    pub auprc: T,
    pub map: T,
    pub macro_f1: T,
    pub macro_recall: T,
    pub accuracy: T,
    pub brier: T,
    pub threshold: T,
}

pub fn metric_report<T: Real>(set: &ScoredSet<T>, threshold: T) -> Result<MetricReport<T>> {
    let t = thresholded_metrics(set, threshold);
    Ok(MetricReport {
        auroc: auroc(set)?,
        auprc: average_precision(set, 1)?,
        map: map_macro(set)?,
        macro_f1: t.macro_f1,
        macro_recall: t.macro_recall,
        accuracy: t.accuracy,
        brier: brier(set)?,
        threshold,
    })
}
