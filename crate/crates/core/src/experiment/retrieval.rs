//! Cross-scaffold retrieval over fused representations: nearest neighbors
//! by cosine similarity, excluding the query's scaffold group.

use crate::data::Split;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::model::AnyModel;

use super::dataset::Dataset;
use super::evaluate::fused_rows;

#[derive(Debug, Clone)]
pub struct RetrievalReport {
    pub k_values: Vec<usize>,
    pub positive_precision: Vec<f64>,
    pub negative_precision: Vec<f64>,
    pub balanced_precision: Vec<f64>,
    /// positive precision@k divided by the gallery positive base rate.
    pub enrichment: Vec<f64>,
    pub base_rate: f64,
    pub queries: usize,
}

/// Core ranking logic over explicit representations. Each row is a query;
/// candidates are all rows from other scaffolds, ranked by cosine
/// similarity of the L2-normalized representations.
pub fn retrieval_from_representations(
    representations: &Matrix<f64>,
    labels: &[u8],
    scaffolds: &[String],
    k_values: &[usize],
) -> Result<RetrievalReport> {
    let n = representations.rows();
    if n != labels.len() || n != scaffolds.len() {
        return Err(Error::Domain("retrieval inputs disagree on length".into()));
    }
    if k_values.is_empty() {
        return Err(Error::InvalidConfig("retrieval needs at least one k".into()));
    }
    let max_k = *k_values.iter().max().unwrap();

    // L2-normalize once.
    let mut unit = representations.clone();
    for r in 0..n {
        let row = unit.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }

    let base_rate = labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
    let mut pos_hits = vec![0.0f64; k_values.len()];
    let mut neg_hits = vec![0.0f64; k_values.len()];
    let mut pos_queries = 0usize;
    let mut neg_queries = 0usize;

    // (similarity, candidate index) max-heap substitute: keep top max_k by
    // simple insertion into a small sorted buffer.
    let mut top: Vec<(f64, usize)> = Vec::with_capacity(max_k + 1);
    for q in 0..n {
        top.clear();
        let mut gallery = 0usize;
        for c in 0..n {
            if scaffolds[c] == scaffolds[q] {
                continue;
            }
            gallery += 1;
            let sim = dot(unit.row(q), unit.row(c));
            if top.len() < max_k {
                top.push((sim, c));
                top.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            } else if sim > top[max_k - 1].0 {
                top[max_k - 1] = (sim, c);
                top.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            }
        }
        if gallery < max_k + 1 {
            return Err(Error::Domain(format!(
                "query {q} has only {gallery} out-of-scaffold candidates, need more than {max_k}"
            )));
        }
        let y = labels[q];
        if y == 1 {
            pos_queries += 1;
        } else {
            neg_queries += 1;
        }
        for (ki, &k) in k_values.iter().enumerate() {
            let same = top[..k].iter().filter(|&&(_, c)| labels[c] == y).count() as f64 / k as f64;
            if y == 1 {
                pos_hits[ki] += same;
            } else {
                neg_hits[ki] += same;
            }
        }
    }
    if pos_queries == 0 || neg_queries == 0 {
        return Err(Error::Domain("retrieval needs queries from both classes".into()));
    }

    let positive_precision: Vec<f64> = pos_hits.iter().map(|h| h / pos_queries as f64).collect();
    let negative_precision: Vec<f64> = neg_hits.iter().map(|h| h / neg_queries as f64).collect();
    let balanced_precision: Vec<f64> = positive_precision
        .iter()
        .zip(&negative_precision)
        .map(|(p, n)| (p + n) / 2.0)
        .collect();
    let enrichment: Vec<f64> = positive_precision.iter().map(|p| p / base_rate).collect();
    Ok(RetrievalReport {
        k_values: k_values.to_vec(),
        positive_precision,
        negative_precision,
        balanced_precision,
        enrichment,
        base_rate,
        queries: n,
    })
}

/// Retrieval over the test split using the model's fused representations.
pub fn retrieval_eval(
    model: &AnyModel<f64>,
    dataset: &Dataset,
    k_values: &[usize],
) -> Result<RetrievalReport> {
    let view = dataset.view(Split::Test);
    let reps = fused_rows(model, dataset, &view.rows)?;
    retrieval_from_representations(&reps, &view.labels, &view.scaffolds, k_values)
}
