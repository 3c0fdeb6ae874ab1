//! The three training objectives and their weighted combination.
//!
//! Every loss returns both its value and the analytic gradients w.r.t. its
//! direct inputs; the model backward pass routes those into parameters.
//! Gradients flow through everything the loss touches, including the
//! disagreement weights, so finite-difference checks hold end to end.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::scalar::Real;

/// Loss weights and temperatures.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig<T> {
    pub lambda_xmod: T,
    pub lambda_supcon: T,
    pub tau_xmod: T,
    pub tau_supcon: T,
    /// When false, every SupCon anchor weight is 1 (ablation switch).
    pub disagreement_weighting: bool,
}

impl<T: Real> Default for LossConfig<T> {
    fn default() -> Self {
        LossConfig {
            lambda_xmod: T::of(0.02),
            lambda_supcon: T::of(0.03),
            tau_xmod: T::of(0.12),
            tau_supcon: T::of(0.15),
            disagreement_weighting: true,
        }
    }
}

impl<T: Real> LossConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.tau_xmod <= T::zero() || self.tau_supcon <= T::zero() {
            return Err(Error::InvalidConfig(
                "contrastive temperatures must be positive".into(),
            ));
        }
        if self.lambda_xmod < T::zero() || self.lambda_supcon < T::zero() {
            return Err(Error::InvalidConfig(
                "loss weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-batch loss values; `total` is the exact weighted sum.
#[derive(Debug, Clone, Copy)]
pub struct LossReport<T> {
    pub bce: T,
    pub xmod: T,
    pub supcon: T,
    pub total: T,
    pub batch_size: usize,
}

pub fn total_loss<T: Real>(
    bce: T,
    xmod: T,
    supcon: T,
    batch_size: usize,
    cfg: &LossConfig<T>,
) -> LossReport<T> {
    LossReport {
        bce,
        xmod,
        supcon,
        total: bce + cfg.lambda_xmod * xmod + cfg.lambda_supcon * supcon,
        batch_size,
    }
}

pub struct BceOutput<T> {
    pub loss: T,
    /// dL/dlogit per element (already divided by the batch size).
    pub grad_logit: Vec<T>,
    /// Number of probabilities clamped away from exactly 0 or 1.
    pub clamped: usize,
}

/// Mean binary cross-entropy over the batch. The gradient is computed in
/// logit space, sigma(logit) - y, which is exact and cancellation-free.
pub fn bce_loss<T: Real>(probs: &[T], labels: &[u8]) -> Result<BceOutput<T>> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Domain(format!(
            "bce_loss needs equal nonempty lengths, got {} probs / {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Domain(format!("labels must be 0/1, got {bad}")));
    }
    let floor = T::of(1e-12);
    let ceil = T::one() - floor;
    let n = T::of(probs.len() as f64);
    let mut clamped = 0;
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let mut p = p;
        if p < floor {
            p = floor;
            clamped += 1;
        } else if p > ceil {
            p = ceil;
            clamped += 1;
        }
        let y_t = T::of(y as f64);
        loss += -(y_t * p.ln() + (T::one() - y_t) * (T::one() - p).ln());
        grad.push((p - y_t) / n);
    }
    Ok(BceOutput {
        loss: loss / n,
        grad_logit: grad,
        clamped,
    })
}

/// Row-normalized copy plus norms; zero-norm rows become zero vectors
/// (cosine similarity 0 to everything) and are counted.
fn normalize_rows<T: Real>(m: &Matrix<T>) -> (Matrix<T>, Vec<T>, usize) {
    let mut unit = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    let mut zero_rows = 0;
    for r in 0..m.rows() {
        let row = unit.row_mut(r);
        let norm = row.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm > T::zero() {
            for x in row.iter_mut() {
                *x = *x / norm;
            }
        } else {
            zero_rows += 1;
        }
        norms.push(norm);
    }
    (unit, norms, zero_rows)
}

/// Backward through row L2-normalization: dz = (du - uhat (uhat . du)) / |z|.
fn normalize_rows_backward<T: Real>(
    unit: &Matrix<T>,
    norms: &[T],
    grad_unit: &Matrix<T>,
) -> Matrix<T> {
    let mut out = Matrix::zeros(unit.rows(), unit.cols());
    for r in 0..unit.rows() {
        if norms[r] <= T::zero() {
            continue;
        }
        let u = unit.row(r);
        let g = grad_unit.row(r);
        let proj = dot(u, g);
        for (o, (&ui, &gi)) in out.row_mut(r).iter_mut().zip(u.iter().zip(g)) {
            *o = (gi - ui * proj) / norms[r];
        }
    }
    out
}

pub struct XmodOutput<T> {
    pub loss: T,
    pub grad_z_protein: Matrix<T>,
    pub grad_z_genome: Matrix<T>,
    pub zero_norm_rows: usize,
}

/// Symmetric cross-modal InfoNCE over temperature-scaled cosine
/// similarities: same-index pairs are positives, all other batch rows are
/// negatives, and the two directions are averaged with 1/(2B).
pub fn xmod_infonce<T: Real>(
    z_protein: &Matrix<T>,
    z_genome: &Matrix<T>,
    tau: T,
) -> Result<XmodOutput<T>> {
    z_protein.check_same_shape(z_genome, "xmod_infonce inputs")?;
    let b = z_protein.rows();
    if b == 0 {
        return Err(Error::Domain("xmod_infonce needs at least one row".into()));
    }
    if tau <= T::zero() {
        return Err(Error::InvalidConfig("xmod temperature must be positive".into()));
    }
    let (p_hat, p_norms, zp0) = normalize_rows(z_protein);
    let (b_hat, b_norms, zb0) = normalize_rows(z_genome);
    // sims[i][j] = cos(z_p_i, z_b_j) / tau
    let mut sims = p_hat.matmul_nt(&b_hat)?;
    for v in sims.data_mut() {
        *v = *v / tau;
    }
    let row_soft = crate::nn::softmax_rows(&sims);
    let sims_t = Matrix::from_fn(b, b, |r, c| sims.get(c, r));
    let col_soft_t = crate::nn::softmax_rows(&sims_t); // col_soft_t[j][i] = colwise softmax
    let inv_2b = T::one() / (T::of(2.0) * T::of(b as f64));
    let mut loss = T::zero();
    for i in 0..b {
        loss += -(row_soft.get(i, i).ln() + col_soft_t.get(i, i).ln());
    }
    loss = loss * inv_2b;

    // dL/dsims_ij = inv_2b/tau * (row_soft_ij + col_soft_ij - 2 delta_ij)
    let scale = inv_2b / tau;
    let mut d_sims = Matrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            let delta = if i == j { T::of(2.0) } else { T::zero() };
            d_sims.set(
                i,
                j,
                scale * (row_soft.get(i, j) + col_soft_t.get(j, i) - delta),
            );
        }
    }
    // d phat = d_sims . bhat ; d bhat = d_sims^T . phat
    let d_p_hat = d_sims.matmul_nn(&b_hat)?;
    let d_sims_t = Matrix::from_fn(b, b, |r, c| d_sims.get(c, r));
    let d_b_hat = d_sims_t.matmul_nn(&p_hat)?;
    Ok(XmodOutput {
        loss,
        grad_z_protein: normalize_rows_backward(&p_hat, &p_norms, &d_p_hat),
        grad_z_genome: normalize_rows_backward(&b_hat, &b_norms, &d_b_hat),
        zero_norm_rows: zp0 + zb0,
    })
}

pub struct SupconOutput<T> {
    pub loss: T,
    pub grad_h: Matrix<T>,
    pub grad_z_protein: Matrix<T>,
    pub grad_z_genome: Matrix<T>,
    /// Anchors that had at least one same-label partner.
    pub active_anchors: usize,
    /// True when the loss degenerated to 0 (no anchors, or zero total weight).
    pub degenerate: bool,
}

/// Disagreement-weighted supervised contrastive loss on L2-normalized fused
/// representations. Per anchor i with same-label partners P(i):
///
///   L_i = -(1/|P(i)|) sum_{p in P(i)} log( e^{s_ip} / sum_{a != i} e^{s_ia} )
///
/// with s = cosine similarity / tau, weighted by the cosine disagreement
/// d_i = (1 - cos(z_p_i, z_b_i)) / 2 and normalized by sum d_i. Anchors
/// without partners are excluded from both sums.
pub fn disagreement_supcon<T: Real>(
    h: &Matrix<T>,
    labels: &[u8],
    z_protein: &Matrix<T>,
    z_genome: &Matrix<T>,
    tau: T,
    weighting: bool,
) -> Result<SupconOutput<T>> {
    let b = h.rows();
    if b < 2 {
        return Err(Error::Domain(format!(
            "disagreement_supcon needs a batch of at least 2, got {b}"
        )));
    }
    if labels.len() != b || z_protein.rows() != b || z_genome.rows() != b {
        return Err(Error::Domain(
            "disagreement_supcon inputs disagree on batch size".into(),
        ));
    }
    if tau <= T::zero() {
        return Err(Error::InvalidConfig("supcon temperature must be positive".into()));
    }
    z_protein.check_same_shape(z_genome, "disagreement_supcon projections")?;

    let zero_grads = || {
        (
            Matrix::zeros(b, h.cols()),
            Matrix::zeros(b, z_protein.cols()),
            Matrix::zeros(b, z_protein.cols()),
        )
    };

    // Disagreement weights and, for the gradient, d cos / d z rows.
    let (p_hat, p_norms, _) = normalize_rows(z_protein);
    let (b_hat, b_norms, _) = normalize_rows(z_genome);
    let half = T::of(0.5);
    let mut weights = Vec::with_capacity(b);
    let mut cosines = Vec::with_capacity(b);
    for i in 0..b {
        let c = dot(p_hat.row(i), b_hat.row(i));
        cosines.push(c);
        weights.push(if weighting { (T::one() - c) * half } else { T::one() });
    }

    let partners: Vec<Vec<usize>> = (0..b)
        .map(|i| (0..b).filter(|&j| j != i && labels[j] == labels[i]).collect())
        .collect();
    let active: Vec<usize> = (0..b).filter(|&i| !partners[i].is_empty()).collect();
    if active.is_empty() {
        let (gh, gp, gb) = zero_grads();
        return Ok(SupconOutput {
            loss: T::zero(),
            grad_h: gh,
            grad_z_protein: gp,
            grad_z_genome: gb,
            active_anchors: 0,
            degenerate: true,
        });
    }
    let weight_total: T = active.iter().map(|&i| weights[i]).sum();
    if weight_total <= T::of(1e-15) * T::of(active.len() as f64) {
        let (gh, gp, gb) = zero_grads();
        return Ok(SupconOutput {
            loss: T::zero(),
            grad_h: gh,
            grad_z_protein: gp,
            grad_z_genome: gb,
            active_anchors: active.len(),
            degenerate: true,
        });
    }

    let (h_hat, h_norms, _) = normalize_rows(h);
    let mut sims = h_hat.matmul_nt(&h_hat)?;
    for v in sims.data_mut() {
        *v = *v / tau;
    }

    // Per-anchor losses and softmax over non-self entries.
    let mut anchor_loss = vec![T::zero(); b];
    let mut soft = Matrix::zeros(b, b); // soft[i][a] for a != i
    for &i in &active {
        let row = sims.row(i);
        let mut max = T::neg_infinity();
        for (a, &s) in row.iter().enumerate() {
            if a != i && s > max {
                max = s;
            }
        }
        let mut denom = T::zero();
        for a in 0..b {
            if a != i {
                let e = (row[a] - max).exp();
                soft.set(i, a, e);
                denom += e;
            }
        }
        for a in 0..b {
            if a != i {
                soft.set(i, a, soft.get(i, a) / denom);
            }
        }
        let lse = max + denom.ln();
        let inv_np = T::one() / T::of(partners[i].len() as f64);
        let mut li = T::zero();
        for &p in &partners[i] {
            li += -(row[p] - lse);
        }
        anchor_loss[i] = li * inv_np;
    }

    let loss = active
        .iter()
        .map(|&i| weights[i] * anchor_loss[i])
        .sum::<T>()
        / weight_total;

    // dL/d sims, then into h_hat and the normalization.
    let mut d_sims = Matrix::zeros(b, b);
    for &i in &active {
        let ci = weights[i] / weight_total;
        let inv_np = T::one() / T::of(partners[i].len() as f64);
        let in_p = {
            let mut mark = vec![false; b];
            for &p in &partners[i] {
                mark[p] = true;
            }
            mark
        };
        for a in 0..b {
            if a == i {
                continue;
            }
            let pos = if in_p[a] { inv_np } else { T::zero() };
            d_sims.set(i, a, ci * (soft.get(i, a) - pos) / tau);
        }
    }
    // dh_hat = (d_sims + d_sims^T) . h_hat
    let mut d_sym = d_sims.clone();
    for i in 0..b {
        for j in 0..b {
            d_sym.set(i, j, d_sims.get(i, j) + d_sims.get(j, i));
        }
    }
    let d_h_hat = d_sym.matmul_nn(&h_hat)?;
    let grad_h = normalize_rows_backward(&h_hat, &h_norms, &d_h_hat);

    // Weight path: dL/dd_i = (L_i - L) / sum(d), and
    // d d_i / d z = -(1/2) d cos_i / d z.
    let mut grad_zp = Matrix::zeros(b, z_protein.cols());
    let mut grad_zb = Matrix::zeros(b, z_protein.cols());
    if weighting {
        for &i in &active {
            let dl_dw = (anchor_loss[i] - loss) / weight_total;
            let coeff = -dl_dw * half;
            if p_norms[i] > T::zero() && b_norms[i] > T::zero() {
                let pu = p_hat.row(i);
                let bu = b_hat.row(i);
                let c = cosines[i];
                for (k, g) in grad_zp.row_mut(i).iter_mut().enumerate() {
                    *g = coeff * (bu[k] - c * pu[k]) / p_norms[i];
                }
                for (k, g) in grad_zb.row_mut(i).iter_mut().enumerate() {
                    *g = coeff * (pu[k] - c * bu[k]) / b_norms[i];
                }
            }
        }
    }

    Ok(SupconOutput {
        loss,
        grad_h,
        grad_z_protein: grad_zp,
        grad_z_genome: grad_zb,
        active_anchors: active.len(),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn random_matrix(rng: &mut Stream, rows: usize, cols: usize) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| rng.next_range(-1.5, 1.5))
    }

    // ---- BCE ----

    #[test]
    fn bce_half_probability_is_ln2() {
        let out = bce_loss(&[0.5], &[1]).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_confident_correct_goes_to_zero() {
        let out = bce_loss(&[1.0 - 1e-9], &[1]).unwrap();
        assert!(out.loss < 1e-8);
        assert_eq!(out.clamped, 0);
    }

    #[test]
    fn bce_exact_zero_or_one_is_clamped_and_counted() {
        let out = bce_loss(&[0.0_f64, 1.0, 0.5], &[1, 0, 1]).unwrap();
        assert_eq!(out.clamped, 2);
        assert!(out.loss.is_finite());
    }

    #[test]
    fn bce_matches_elementwise_oracle() {
        let mut rng = Stream::new(41, &["bce"]);
        let probs: Vec<f64> = (0..16).map(|_| rng.next_range(0.01, 0.99)).collect();
        let labels: Vec<u8> = (0..16).map(|_| (rng.next_unit() < 0.5) as u8).collect();
        let out = bce_loss(&probs, &labels).unwrap();
        let mut oracle = 0.0;
        for (&p, &y) in probs.iter().zip(&labels) {
            oracle += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
        }
        oracle /= 16.0;
        assert!((out.loss - oracle).abs() < 1e-12);
    }

    #[test]
    fn bce_rejects_bad_labels() {
        assert!(bce_loss(&[0.5], &[2]).is_err());
    }

    // ---- InfoNCE ----

    #[test]
    fn infonce_single_row_is_exactly_zero() {
        let z = Matrix::from_rows(&[vec![0.3, -0.7, 1.1]]).unwrap();
        let w = Matrix::from_rows(&[vec![-0.2, 0.5, 0.9]]).unwrap();
        let out = xmod_infonce(&z, &w, 0.12).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn infonce_orthogonal_pair_matches_closed_form() {
        // z_p = z_b with mutually orthogonal rows: diagonal cos = 1, off = 0.
        let z = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let tau = 0.12_f64;
        let out = xmod_infonce(&z, &z, tau).unwrap();
        let per_direction = -((1.0 / tau).exp() / ((1.0 / tau).exp() + 1.0)).ln();
        assert!(
            (out.loss - per_direction).abs() < 1e-12,
            "{} vs {per_direction}",
            out.loss
        );
    }

    // Brute-force double-loop oracle for Eq.-9-style symmetric InfoNCE.
    fn infonce_oracle(zp: &Matrix<f64>, zb: &Matrix<f64>, tau: f64) -> f64 {
        let b = zp.rows();
        let cos = |x: &[f64], y: &[f64]| {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (nx * ny)
        };
        let mut total = 0.0;
        for i in 0..b {
            let mut denom_pb = 0.0;
            let mut denom_bp = 0.0;
            for j in 0..b {
                denom_pb += (cos(zp.row(i), zb.row(j)) / tau).exp();
                denom_bp += (cos(zb.row(i), zp.row(j)) / tau).exp();
            }
            total -= ((cos(zp.row(i), zb.row(i)) / tau).exp() / denom_pb).ln();
            total -= ((cos(zb.row(i), zp.row(i)) / tau).exp() / denom_bp).ln();
        }
        total / (2.0 * b as f64)
    }

    #[test]
    fn infonce_matches_brute_force() {
        let mut rng = Stream::new(43, &["nce"]);
        let zp = random_matrix(&mut rng, 5, 4);
        let zb = random_matrix(&mut rng, 5, 4);
        let out = xmod_infonce(&zp, &zb, 0.12).unwrap();
        let want = infonce_oracle(&zp, &zb, 0.12);
        assert!((out.loss - want).abs() < 1e-10, "{} vs {want}", out.loss);
    }

    #[test]
    fn infonce_is_symmetric_in_modalities() {
        let mut rng = Stream::new(44, &["nce_sym"]);
        let zp = random_matrix(&mut rng, 6, 5);
        let zb = random_matrix(&mut rng, 6, 5);
        let a = xmod_infonce(&zp, &zb, 0.12).unwrap().loss;
        let b = xmod_infonce(&zb, &zp, 0.12).unwrap().loss;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn infonce_is_scale_invariant_per_row() {
        let mut rng = Stream::new(45, &["nce_scale"]);
        let zp = random_matrix(&mut rng, 4, 3);
        let zb = random_matrix(&mut rng, 4, 3);
        let mut zp_scaled = zp.clone();
        for (i, v) in zp_scaled.row_mut(2).iter_mut().enumerate() {
            *v = zp.get(2, i) * 7.5;
        }
        let a = xmod_infonce(&zp, &zb, 0.12).unwrap().loss;
        let b = xmod_infonce(&zp_scaled, &zb, 0.12).unwrap().loss;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn infonce_flags_zero_norm_rows() {
        let zp = Matrix::from_rows(&[vec![0.0_f64, 0.0], vec![1.0, 0.0]]).unwrap();
        let zb = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let out = xmod_infonce(&zp, &zb, 0.12).unwrap();
        assert_eq!(out.zero_norm_rows, 1);
        assert!(out.loss.is_finite());
    }

    #[test]
    fn infonce_gradients_match_finite_differences() {
        let mut rng = Stream::new(46, &["nce_grad"]);
        let zp = random_matrix(&mut rng, 4, 3);
        let zb = random_matrix(&mut rng, 4, 3);
        let out = xmod_infonce(&zp, &zb, 0.12).unwrap();
        let h = 1e-5;
        for r in 0..4 {
            for c in 0..3 {
                for side in 0..2 {
                    let mut plus = if side == 0 { zp.clone() } else { zb.clone() };
                    let mut minus = plus.clone();
                    plus.set(r, c, plus.get(r, c) + h);
                    minus.set(r, c, minus.get(r, c) - h);
                    let (lp, lm) = if side == 0 {
                        (
                            xmod_infonce(&plus, &zb, 0.12).unwrap().loss,
                            xmod_infonce(&minus, &zb, 0.12).unwrap().loss,
                        )
                    } else {
                        (
                            xmod_infonce(&zp, &plus, 0.12).unwrap().loss,
                            xmod_infonce(&zp, &minus, 0.12).unwrap().loss,
                        )
                    };
                    let fd = (lp - lm) / (2.0 * h);
                    let a = if side == 0 {
                        out.grad_z_protein.get(r, c)
                    } else {
                        out.grad_z_genome.get(r, c)
                    };
                    let scale = a.abs().max(fd.abs()).max(1e-7);
                    assert!(
                        (a - fd).abs() / scale < 1e-4,
                        "side {side} ({r},{c}): {a} vs {fd}"
                    );
                }
            }
        }
    }

    // ---- SupCon ----

    #[test]
    fn supcon_identical_representations_closed_form() {
        let b = 5;
        let h = Matrix::from_fn(b, 3, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let labels = vec![1u8; b];
        let mut rng = Stream::new(47, &["sup_cf"]);
        let zp = random_matrix(&mut rng, b, 4);
        let zb = random_matrix(&mut rng, b, 4);
        let out = disagreement_supcon(&h, &labels, &zp, &zb, 0.15, true).unwrap();
        let want = ((b - 1) as f64).ln(); // -log(1/(B-1))
        assert!((out.loss - want).abs() < 1e-10, "{} vs {want}", out.loss);
    }

    #[test]
    fn supcon_zero_disagreement_annihilates() {
        let mut rng = Stream::new(48, &["sup_zero"]);
        let h = random_matrix(&mut rng, 4, 3);
        let z = random_matrix(&mut rng, 4, 5);
        let labels = vec![0, 0, 1, 1];
        let out = disagreement_supcon(&h, &labels, &z, &z, 0.15, true).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.degenerate);
        assert!(out.grad_h.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn supcon_anchor_without_partner_is_excluded() {
        let mut rng = Stream::new(49, &["sup_excl"]);
        let h = random_matrix(&mut rng, 3, 3);
        let zp = random_matrix(&mut rng, 3, 4);
        let zb = random_matrix(&mut rng, 3, 4);
        // Label 0 appears once: that anchor is excluded; two label-1 anchors remain.
        let out = disagreement_supcon(&h, &[0, 1, 1], &zp, &zb, 0.15, true).unwrap();
        assert_eq!(out.active_anchors, 2);
        // All same label vs all distinct labels.
        let none = disagreement_supcon(&h, &[0, 1, 1], &zp, &zb, 0.15, true).unwrap();
        assert!(!none.degenerate);
        let empty = disagreement_supcon(
            &h,
            &[0, 1, 1],
            &zp,
            &zb,
            0.15,
            true,
        );
        assert!(empty.is_ok());
    }

    #[test]
    fn supcon_all_anchors_excluded_is_zero_with_flag() {
        let mut rng = Stream::new(50, &["sup_all_excl"]);
        let h = random_matrix(&mut rng, 2, 3);
        let zp = random_matrix(&mut rng, 2, 4);
        let zb = random_matrix(&mut rng, 2, 4);
        let out = disagreement_supcon(&h, &[0, 1], &zp, &zb, 0.15, true).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.degenerate);
        assert_eq!(out.active_anchors, 0);
    }

    // Independent triple-loop oracle, straight from the formula.
    fn supcon_oracle(
        h: &Matrix<f64>,
        labels: &[u8],
        zp: &Matrix<f64>,
        zb: &Matrix<f64>,
        tau: f64,
        weighting: bool,
    ) -> f64 {
        let b = h.rows();
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = |x: &[f64], y: &[f64]| {
            x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (norm(x) * norm(y))
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..b {
            let partners: Vec<usize> =
                (0..b).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if partners.is_empty() {
                continue;
            }
            let w = if weighting {
                (1.0 - cos(zp.row(i), zb.row(i))) / 2.0
            } else {
                1.0
            };
            let mut li = 0.0;
            for &p in &partners {
                let mut denom = 0.0;
                for a in 0..b {
                    if a != i {
                        denom += (cos(h.row(i), h.row(a)) / tau).exp();
                    }
                }
                li -= ((cos(h.row(i), h.row(p)) / tau).exp() / denom).ln();
            }
            li /= partners.len() as f64;
            num += w * li;
            den += w;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    #[test]
    fn supcon_matches_brute_force() {
        let mut rng = Stream::new(51, &["sup_bf"]);
        let h = random_matrix(&mut rng, 6, 4);
        let zp = random_matrix(&mut rng, 6, 5);
        let zb = random_matrix(&mut rng, 6, 5);
        let labels = vec![0, 1, 0, 1, 1, 0];
        for weighting in [true, false] {
            let out = disagreement_supcon(&h, &labels, &zp, &zb, 0.15, weighting).unwrap();
            let want = supcon_oracle(&h, &labels, &zp, &zb, 0.15, weighting);
            assert!(
                (out.loss - want).abs() < 1e-10,
                "weighting {weighting}: {} vs {want}",
                out.loss
            );
        }
    }

    #[test]
    fn supcon_weights_span_zero_to_one() {
        let zp = Matrix::from_rows(&[vec![1.0_f64, 0.0], vec![1.0, 0.0]]).unwrap();
        let zb_parallel = zp.clone();
        let zb_anti = Matrix::from_rows(&[vec![-1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let h = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.8, -0.1]]).unwrap();
        let labels = [1u8, 1];
        let par = disagreement_supcon(&h, &labels, &zp, &zb_parallel, 0.15, true).unwrap();
        assert!(par.degenerate && par.loss == 0.0);
        let anti = disagreement_supcon(&h, &labels, &zp, &zb_anti, 0.15, true).unwrap();
        // Anti-parallel weights are 1, so the loss equals the unweighted one.
        let unweighted = disagreement_supcon(&h, &labels, &zp, &zb_anti, 0.15, false).unwrap();
        assert!((anti.loss - unweighted.loss).abs() < 1e-12);
    }

    #[test]
    fn supcon_gradients_match_finite_differences() {
        let mut rng = Stream::new(52, &["sup_grad"]);
        let h = random_matrix(&mut rng, 5, 3);
        let zp = random_matrix(&mut rng, 5, 4);
        let zb = random_matrix(&mut rng, 5, 4);
        let labels = vec![0, 1, 0, 1, 0];
        let out = disagreement_supcon(&h, &labels, &zp, &zb, 0.15, true).unwrap();
        let hstep = 1e-5;
        let eval = |h: &Matrix<f64>, zp: &Matrix<f64>, zb: &Matrix<f64>| {
            disagreement_supcon(h, &labels, zp, zb, 0.15, true).unwrap().loss
        };
        for r in 0..5 {
            for c in 0..3 {
                let mut plus = h.clone();
                let mut minus = h.clone();
                plus.set(r, c, plus.get(r, c) + hstep);
                minus.set(r, c, minus.get(r, c) - hstep);
                let fd = (eval(&plus, &zp, &zb) - eval(&minus, &zp, &zb)) / (2.0 * hstep);
                let a = out.grad_h.get(r, c);
                let scale = a.abs().max(fd.abs()).max(1e-7);
                assert!((a - fd).abs() / scale < 1e-4, "h ({r},{c}): {a} vs {fd}");
            }
            for c in 0..4 {
                let mut plus = zp.clone();
                let mut minus = zp.clone();
                plus.set(r, c, plus.get(r, c) + hstep);
                minus.set(r, c, minus.get(r, c) - hstep);
                let fd = (eval(&h, &plus, &zb) - eval(&h, &minus, &zb)) / (2.0 * hstep);
                let a = out.grad_z_protein.get(r, c);
                let scale = a.abs().max(fd.abs()).max(1e-7);
                assert!((a - fd).abs() / scale < 1e-4, "zp ({r},{c}): {a} vs {fd}");

                let mut plus = zb.clone();
                let mut minus = zb.clone();
                plus.set(r, c, plus.get(r, c) + hstep);
                minus.set(r, c, minus.get(r, c) - hstep);
                let fd = (eval(&h, &zp, &plus) - eval(&h, &zp, &minus)) / (2.0 * hstep);
                let a = out.grad_z_genome.get(r, c);
                let scale = a.abs().max(fd.abs()).max(1e-7);
                assert!((a - fd).abs() / scale < 1e-4, "zb ({r},{c}): {a} vs {fd}");
            }
        }
    }

    // ---- Combination ----

    #[test]
    fn total_is_exact_weighted_sum() {
        let cfg = LossConfig::<f64>::default();
        let report = total_loss(0.7, 1.3, 2.1, 32, &cfg);
        let want = 0.7 + 0.02 * 1.3 + 0.03 * 2.1;
        assert!((report.total - want).abs() < 1e-12);
        assert_eq!(report.batch_size, 32);
    }

    #[test]
    fn ce_only_weights_reduce_total_to_bce() {
        let cfg = LossConfig {
            lambda_xmod: 0.0,
            lambda_supcon: 0.0,
            ..LossConfig::<f64>::default()
        };
        let report = total_loss(0.9, 5.0, 7.0, 8, &cfg);
        assert_eq!(report.total, 0.9);
    }

    #[test]
    fn all_zero_components_give_zero_total() {
        let cfg = LossConfig::<f64>::default();
        assert_eq!(total_loss(0.0, 0.0, 0.0, 4, &cfg).total, 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = LossConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.tau_xmod = 0.0;
        assert!(cfg.validate().is_err());
        cfg.tau_xmod = 0.12;
        cfg.lambda_supcon = -0.1;
        assert!(cfg.validate().is_err());
    }
}
