//! Synthetic embedding worlds and synthetic gene corpora.
//!
//! A world draws a shared per-pair latent context plus a label signal for
//! each modality, mixes them through fixed random loading maps, and adds
//! observation noise. With probability `conflict_rate` the protein-side
//! label signal is anti-correlated, modelling pairs whose sequence
//! similarity is misleading; a per-pair identity score tracks the protein
//! signal so the hard conflict subset is constructible.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::Stream;
use crate::scalar::Real;

use super::genes::{GeneRecord, Strand};
use super::pairs::{GenePair, Split};
use super::store::EmbeddingStore;

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub latent_dim: usize,
    pub protein_dim: usize,
    pub genome_dim: usize,
    pub signal_channels: usize,
    pub conflict_rate: f64,
    pub signal_strength_protein: f64,
    pub signal_strength_genome: f64,
    pub signal_noise_protein: f64,
    pub signal_noise_genome: f64,
    pub observation_noise_protein: f64,
    pub observation_noise_genome: f64,
    /// Strength of the shared latent context in both modalities.
    pub context_scale: f64,
    /// Scale of the per-scaffold context offset shared by every pair on a
    /// scaffold. Nonzero values shift the context distribution between
    /// scaffold-level splits, like neighborhood statistics that differ
    /// across assemblies.
    pub scaffold_context_scale: f64,
    /// Fraction of the shared context retained by the protein view of a
    /// conflicted pair (1.0 = no corruption). Lower values make conflicts
    /// detectable by comparing the two views' contexts.
    pub conflict_context_retention: f64,
    /// Probability that the protein (and, independently with the same
    /// rate, the genome) view of a pair is low-quality. At most one view
    /// per pair is weak, so the informative view varies pair by pair but
    /// fusion always has something to lean on. Must be at most 0.5.
    pub unreliable_rate: f64,
    /// Attenuation factor applied to a low-quality view's label coupling.
    pub unreliable_attenuation: f64,
    /// Marker channels per modality that encode the view's reliability
    /// (mixed into the observed embedding like any other channel).
    pub marker_channels: usize,
    pub positive_rate: f64,
    /// Pairs per synthetic scaffold.
    pub scaffold_block: usize,
    pub seed: u64,
}

impl Default for SyntheticWorld {
    fn default() -> Self {
        SyntheticWorld {
            latent_dim: 12,
            protein_dim: 96,
            genome_dim: 48,
            signal_channels: 6,
            conflict_rate: 0.0,
            signal_strength_protein: 1.0,
            signal_strength_genome: 0.8,
            signal_noise_protein: 0.5,
            signal_noise_genome: 1.0,
            observation_noise_protein: 0.6,
            observation_noise_genome: 0.6,
            context_scale: 1.0,
            scaffold_context_scale: 0.0,
            conflict_context_retention: 1.0,
            unreliable_rate: 0.0,
            unreliable_attenuation: 0.3,
            marker_channels: 2,
            positive_rate: 0.5,
            scaffold_block: 10,
            seed: 1,
        }
    }
}

impl SyntheticWorld {
    /// Benchmark preset: both modalities are individually noisy (neither
    /// supports high AUROC alone), the shared context dominates the raw
    /// embeddings, and conflicted pairs make the protein view actively
    /// misleading. Fusion approaches the combined signal only by weighing
    /// the modalities against each other.
    pub fn benchmark(conflict_rate: f64, seed: u64) -> Self {
        SyntheticWorld {
            conflict_rate,
            seed,
            signal_strength_protein: 0.45,
            signal_strength_genome: 0.30,
            signal_noise_protein: 1.0,
            signal_noise_genome: 1.0,
            observation_noise_protein: 0.6,
            observation_noise_genome: 0.6,
            context_scale: 1.8,
            scaffold_context_scale: 1.2,
            conflict_context_retention: 0.55,
            unreliable_rate: 0.35,
            unreliable_attenuation: 0.25,
            ..SyntheticWorld::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(0.0..=1.0).contains(&self.conflict_rate) {
            return Err(Error::InvalidConfig(format!(
                "conflict_rate must be in [0, 1], got {}",
                self.conflict_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.conflict_context_retention) {
            return Err(Error::InvalidConfig(format!(
                "conflict_context_retention must be in [0, 1], got {}",
                self.conflict_context_retention
            )));
        }
        if !(0.0..=0.5).contains(&self.unreliable_rate)
            || !(0.0..=1.0).contains(&self.unreliable_attenuation)
        {
            return Err(Error::InvalidConfig(
                "unreliable_rate must be in [0, 0.5] and unreliable_attenuation in [0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.positive_rate) || self.positive_rate == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "positive_rate must be in (0, 1), got {}",
                self.positive_rate
            )));
        }
        if self.latent_dim == 0
            || self.protein_dim == 0
            || self.genome_dim == 0
            || self.signal_channels == 0
            || self.scaffold_block == 0
        {
            return Err(Error::InvalidConfig("world dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Everything `synth_generate` produces. Vector indices align with store
/// rows; `pairs[i].pair_id` is `synth:{i}`.
#[derive(Debug, Clone)]
pub struct SyntheticData<T> {
    pub store: EmbeddingStore<T>,
    pub pairs: Vec<GenePair>,
    pub labels: Vec<u8>,
    pub identities: Vec<f64>,
    /// Ground-truth conflict flags, for diagnostics and tests.
    pub conflicted: Vec<bool>,
}

fn loading(stream: &mut Stream, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| stream.next_normal() * scale)
}

/// Round through f32 so in-memory values match the on-disk representation.
fn narrow(v: f64) -> f64 {
    v as f32 as f64
}

pub fn synth_generate<T: Real>(world: &SyntheticWorld, n_pairs: usize) -> Result<SyntheticData<T>> {
    world.validate()?;
    let k = world.latent_dim;
    let m = world.signal_channels;

    let channels = m + world.marker_channels;
    let mut map_stream = Stream::new(world.seed, &["world", "loadings"]);
    let u_scale = world.context_scale / (k as f64).sqrt();
    let s_scale = 1.0 / (channels as f64).sqrt();
    let protein_u = loading(&mut map_stream, world.protein_dim, k, u_scale);
    let protein_s = loading(&mut map_stream, world.protein_dim, channels, s_scale);
    let genome_u = loading(&mut map_stream, world.genome_dim, k, u_scale);
    let genome_s = loading(&mut map_stream, world.genome_dim, channels, s_scale);

    let mut protein = Matrix::zeros(n_pairs, world.protein_dim);
    let mut genome = Matrix::zeros(n_pairs, world.genome_dim);
    let mut labels = Vec::with_capacity(n_pairs);
    let mut identities = Vec::with_capacity(n_pairs);
    let mut conflicted = Vec::with_capacity(n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut pair_ids = Vec::with_capacity(n_pairs);

    let mut latent = vec![0.0_f64; k];
    let mut latent_protein = vec![0.0_f64; k];
    let mut signal = vec![0.0_f64; channels];
    for i in 0..n_pairs {
        let mut rng = Stream::new(world.seed, &["pair", &i.to_string()]);
        let y = rng.next_bool(world.positive_rate) as u8;
        let is_conflict = rng.next_bool(world.conflict_rate);
        let t = if y == 1 { 1.0 } else { -1.0 };
        let t_protein = if is_conflict { -t } else { t };
        let reliability_draw = rng.next_unit();
        let quality_protein = if reliability_draw < world.unreliable_rate {
            world.unreliable_attenuation
        } else {
            1.0
        };
        let quality_genome = if reliability_draw >= world.unreliable_rate
            && reliability_draw < 2.0 * world.unreliable_rate
        {
            world.unreliable_attenuation
        } else {
            1.0
        };

        for u in latent.iter_mut() {
            *u = rng.next_normal();
        }
        if world.scaffold_context_scale > 0.0 {
            let scaffold_index = (i / world.scaffold_block) as u64;
            let offset_key = crate::rng::key_with(
                crate::rng::stream_key(world.seed, &["scaffold_offset"]),
                scaffold_index,
            );
            for (j, u) in latent.iter_mut().enumerate() {
                let draw = crate::rng::unit_at(offset_key, j as u64);
                // Convert two uniforms to one normal via Box-Muller.
                let draw2 = crate::rng::unit_at(offset_key, (j + k) as u64);
                let normal = (-2.0 * (1.0 - draw).ln()).sqrt()
                    * (std::f64::consts::TAU * draw2).cos();
                *u += world.scaffold_context_scale * normal;
            }
        }
        // Conflicted pairs: the protein view sits in a partly unrelated
        // context, so cross-view comparison can expose the conflict.
        let rho = if is_conflict {
            world.conflict_context_retention
        } else {
            1.0
        };
        let fresh_scale = (1.0 - rho * rho).sqrt();
        for (up, &u) in latent_protein.iter_mut().zip(&latent) {
            *up = rho * u + fresh_scale * rng.next_normal();
        }

        // Protein view. A low-quality view couples weakly to the label;
        // marker channels encode the reliability itself, and the context
        // stays full strength.
        for (j, s) in signal.iter_mut().enumerate() {
            *s = if j < m {
                quality_protein * t_protein * world.signal_strength_protein
                    + world.signal_noise_protein * rng.next_normal()
            } else {
                quality_protein + 0.1 * rng.next_normal()
            };
        }
        let signal_mean = signal[..m].iter().sum::<f64>() / m as f64;
        for c in 0..world.protein_dim {
            let mut v = world.observation_noise_protein * rng.next_normal();
            for (j, &u) in latent_protein.iter().enumerate() {
                v += protein_u.get(c, j) * u;
            }
            for (j, &s) in signal.iter().enumerate() {
                v += protein_s.get(c, j) * s;
            }
            protein.set(i, c, narrow(v));
        }
        // Identity score tracks the realized protein signal as it appears
        // in the embedding (attenuated views look ambiguous).
        let id_logit = 2.0 * signal_mean + 0.25 * rng.next_normal();
        let identity = 1.0 / (1.0 + (-id_logit).exp());
        identities.push(identity);

        // Genome view, with the same reliability semantics.
        for (j, s) in signal.iter_mut().enumerate() {
            *s = if j < m {
                quality_genome * t * world.signal_strength_genome
                    + world.signal_noise_genome * rng.next_normal()
            } else {
                quality_genome + 0.1 * rng.next_normal()
            };
        }
        for c in 0..world.genome_dim {
            let mut v = world.observation_noise_genome * rng.next_normal();
            for (j, &u) in latent.iter().enumerate() {
                v += genome_u.get(c, j) * u;
            }
            for (j, &s) in signal.iter().enumerate() {
                v += genome_s.get(c, j) * s;
            }
            genome.set(i, c, narrow(v));
        }

        labels.push(y);
        conflicted.push(is_conflict);

        // A manifest row whose IGS/strand organization is consistent with
        // the label under the default construction rules.
        let scaffold_id = format!("synthscaffold{}", i / world.scaffold_block);
        let (igs, same_strand) = if y == 1 {
            let draw = -19.0 * (1.0 - rng.next_unit()).ln();
            ((draw.floor() as i64).clamp(0, 50), true)
        } else {
            let draw = 1000.0 - 7618.0 * (1.0 - rng.next_unit()).ln();
            (draw.floor() as i64, rng.next_bool(0.5))
        };
        let pair_id = format!("synth:{i}");
        pair_ids.push(pair_id.clone());
        pairs.push(GenePair {
            pair_id,
            scaffold_id,
            gene_a: format!("g{}", 2 * i),
            gene_b: format!("g{}", 2 * i + 1),
            igs,
            same_strand,
            label: y,
            split: Split::Train,
        });
    }

    let protein_t = Matrix::from_fn(n_pairs, world.protein_dim, |r, c| T::of(protein.get(r, c)));
    let genome_t = Matrix::from_fn(n_pairs, world.genome_dim, |r, c| T::of(genome.get(r, c)));
    Ok(SyntheticData {
        store: EmbeddingStore::new(pair_ids, protein_t, genome_t)?,
        pairs,
        labels,
        identities,
        conflicted,
    })
}

/// Configuration for the synthetic gene-record corpus used to exercise the
/// pair-construction pipeline at scale.
#[derive(Debug, Clone)]
pub struct GeneWorldConfig {
    pub scaffolds: usize,
    pub genes_per_scaffold: usize,
    /// Mean genes per co-transcribed run.
    pub operon_size_mean: f64,
    /// Fraction of run boundaries with an ambiguous (excluded) gap.
    pub ambiguous_rate: f64,
    pub seed: u64,
}

impl Default for GeneWorldConfig {
    fn default() -> Self {
        GeneWorldConfig {
            scaffolds: 1200,
            genes_per_scaffold: 12,
            operon_size_mean: 3.0,
            ambiguous_rate: 0.15,
            seed: 1,
        }
    }
}

/// Generate start-sorted gene records whose adjacent-pair IGS distribution
/// mixes operon-like short gaps, large intergenic distances, divergent
/// boundaries, and an ambiguous middle band.
pub fn generate_gene_records(cfg: &GeneWorldConfig) -> Vec<GeneRecord> {
    let mut records = Vec::with_capacity(cfg.scaffolds * cfg.genes_per_scaffold);
    for s in 0..cfg.scaffolds {
        let mut rng = Stream::new(cfg.seed, &["genes", &s.to_string()]);
        let scaffold_id = format!("scaffold{s:05}");
        let mut pos: u64 = 1 + rng.next_below(500);
        let mut run_left = 0usize;
        let mut strand = Strand::Forward;
        for g in 0..cfg.genes_per_scaffold {
            if run_left == 0 {
                // New co-transcribed run.
                run_left = 1 + (-(cfg.operon_size_mean - 1.0) * (1.0 - rng.next_unit()).ln())
                    .round() as usize;
                strand = if rng.next_bool(0.5) {
                    Strand::Forward
                } else {
                    Strand::Reverse
                };
                if g > 0 {
                    let gap = if rng.next_bool(cfg.ambiguous_rate) {
                        100 + rng.next_below(800)
                    } else {
                        1000 + (-7618.0 * (1.0 - rng.next_unit()).ln()) as u64
                    };
                    pos += gap;
                }
            } else if g > 0 {
                // Within-run gap: short, occasionally overlapping.
                let igs: i64 = if rng.next_bool(0.1) {
                    -(1 + rng.next_below(10) as i64)
                } else {
                    (-19.0 * (1.0 - rng.next_unit()).ln()).floor() as i64
                };
                let igs = igs.min(50);
                pos = (pos as i64 + igs).max(1) as u64;
            }
            let length = 200 + (-800.0 * (1.0 - rng.next_unit()).ln()) as u64;
            records.push(GeneRecord {
                scaffold_id: scaffold_id.clone(),
                gene_id: format!("{scaffold_id}_g{g:03}"),
                start: pos,
                end: pos + length,
                strand,
                sequence: None,
            });
            pos += length + 1;
            run_left -= 1;
        }
    }
    records
}
