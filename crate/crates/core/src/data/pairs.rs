//! Adjacent-gene pair construction, scaffold-level splitting, and per-split
//! class balancing.
//!
//! Labeling rules: adjacent same-strand pairs separated by at most
//! `pos_max_igs` are positives; pairs separated by at least `neg_min_igs`,
//! or divergently transcribed adjacent pairs (<- ->), are negatives;
//! same-strand pairs in the gap between the cutoffs are excluded as
//! ambiguous, as are close convergent pairs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{stream_key, unit_at, Stream};

use super::genes::{GeneRecord, Strand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Domain(format!("invalid split `{other}`"))),
        }
    }
}

/// One labeled adjacent-gene pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GenePair {
    pub pair_id: String,
    pub scaffold_id: String,
    pub gene_a: String,
    pub gene_b: String,
    /// Intergenic spacer in bp; negative for overlapping genes.
    pub igs: i64,
    pub same_strand: bool,
    pub label: u8,
    pub split: Split,
}

/// Labeling cutoffs (config-exposed; the defaults reproduce the intended
/// positive/negative IGS scales).
#[derive(Debug, Clone, Copy)]
pub struct PairRules {
    pub pos_max_igs: i64,
    pub neg_min_igs: i64,
}

impl Default for PairRules {
    fn default() -> Self {
        PairRules {
            pos_max_igs: 50,
            neg_min_igs: 1000,
        }
    }
}

impl PairRules {
    pub fn validate(&self) -> Result<()> {
        if self.pos_max_igs >= self.neg_min_igs {
            return Err(Error::InvalidConfig(format!(
                "pos_max_igs {} must be below neg_min_igs {}",
                self.pos_max_igs, self.neg_min_igs
            )));
        }
        Ok(())
    }

    /// Label for an adjacent pair, or None when the pair is ambiguous.
    pub fn classify(&self, a: &GeneRecord, b: &GeneRecord, igs: i64) -> Option<u8> {
        let divergent = a.strand == Strand::Reverse && b.strand == Strand::Forward;
        if divergent {
            return Some(0);
        }
        if igs >= self.neg_min_igs {
            return Some(0);
        }
        let same_strand = a.strand == b.strand;
        if same_strand && igs <= self.pos_max_igs {
            return Some(1);
        }
        None
    }
}

/// Bases strictly between two genes on the same scaffold: b.start - a.end - 1.
/// Negative values indicate overlap. `a` must precede `b` in start order.
pub fn compute_igs(a: &GeneRecord, b: &GeneRecord) -> Result<i64> {
    if a.scaffold_id != b.scaffold_id {
        return Err(Error::Domain(format!(
            "genes {} and {} are on different scaffolds",
            a.gene_id, b.gene_id
        )));
    }
    if a.start > b.start {
        return Err(Error::Domain(format!(
            "gene {} must precede {} in start coordinate",
            a.gene_id, b.gene_id
        )));
    }
    Ok(b.start as i64 - a.end as i64 - 1)
}

/// Build labeled pairs from start-sorted per-scaffold gene records.
/// Ambiguous adjacent pairs are dropped; splits and balancing are applied
/// by the later pipeline stages.
pub fn build_pairs(genes: &[GeneRecord], rules: &PairRules) -> Result<Vec<GenePair>> {
    rules.validate()?;
    let mut by_scaffold: Vec<(&str, Vec<&GeneRecord>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for g in genes {
        g.validate()?;
        match index.get(g.scaffold_id.as_str()) {
            Some(&i) => by_scaffold[i].1.push(g),
            None => {
                index.insert(&g.scaffold_id, by_scaffold.len());
                by_scaffold.push((&g.scaffold_id, vec![g]));
            }
        }
    }
    let mut pairs = Vec::new();
    for (scaffold, list) in &by_scaffold {
        for window in list.windows(2) {
            let (a, b) = (window[0], window[1]);
            if a.start > b.start {
                return Err(Error::Domain(format!(
                    "scaffold {scaffold} is not sorted by start ({} after {})",
                    b.gene_id, a.gene_id
                )));
            }
            let igs = compute_igs(a, b)?;
            if let Some(label) = rules.classify(a, b, igs) {
                pairs.push(GenePair {
                    pair_id: format!("{scaffold}|{}|{}", a.gene_id, b.gene_id),
                    scaffold_id: scaffold.to_string(),
                    gene_a: a.gene_id.clone(),
                    gene_b: b.gene_id.clone(),
                    igs,
                    same_strand: a.strand == b.strand,
                    label,
                    split: Split::Train,
                });
            }
        }
    }
    Ok(pairs)
}

/// Train/val/test fractions; must sum to 1.
#[derive(Debug, Clone, Copy)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.69,
            val: 0.14,
            test: 0.17,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 || self.train < 0.0 || self.val < 0.0 || self.test < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be nonnegative and sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Assign every pair of a scaffold to exactly one split via a deterministic
/// hash of (seed, scaffold_id). Pure function of its inputs: insertion
/// order and prior calls cannot change the assignment.
pub fn scaffold_split(pairs: &mut [GenePair], fractions: SplitFractions, seed: u64) -> Result<()> {
    fractions.validate()?;
    for pair in pairs.iter_mut() {
        let u = unit_at(stream_key(seed, &["scaffold_split", &pair.scaffold_id]), 0);
        pair.split = if u < fractions.train {
            Split::Train
        } else if u < fractions.train + fractions.val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(())
}

/// Balance classes within each split by downsampling the majority class,
/// keeping original order. Deterministic in (seed, split).
pub fn balance_splits(pairs: Vec<GenePair>, seed: u64) -> Vec<GenePair> {
    let mut keep = vec![true; pairs.len()];
    for split in Split::ALL {
        let pos: Vec<usize> = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.split == split && p.label == 1)
            .map(|(i, _)| i)
            .collect();
        let neg: Vec<usize> = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.split == split && p.label == 0)
            .map(|(i, _)| i)
            .collect();
        let target = pos.len().min(neg.len());
        for (class, members) in [("pos", pos), ("neg", neg)] {
            if members.len() > target {
                let mut shuffled = members.clone();
                Stream::new(seed, &["balance", split.name(), class]).shuffle(&mut shuffled);
                for &drop in &shuffled[target..] {
                    keep[drop] = false;
                }
            }
        }
    }
    pairs
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| p)
        .collect()
}

/// Full pipeline: pair construction, scaffold splitting, per-split
/// balancing.
pub fn build_dataset(
    genes: &[GeneRecord],
    rules: &PairRules,
    fractions: SplitFractions,
    seed: u64,
) -> Result<Vec<GenePair>> {
    let mut pairs = build_pairs(genes, rules)?;
    scaffold_split(&mut pairs, fractions, seed)?;
    Ok(balance_splits(pairs, seed))
}

const MANIFEST_HEADER: &str = "pair_id\tscaffold_id\tgene_a\tgene_b\tigs\tlabel\tsplit";

pub fn format_pair_manifest(pairs: &[GenePair]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for p in pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.pair_id,
            p.scaffold_id,
            p.gene_a,
            p.gene_b,
            p.igs,
            p.label,
            p.split.name()
        ));
    }
    out
}

pub fn write_pair_manifest(path: &Path, pairs: &[GenePair]) -> Result<()> {
    fs::write(path, format_pair_manifest(pairs))?;
    Ok(())
}

pub fn parse_pair_manifest(text: &str) -> Result<Vec<GenePair>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MANIFEST_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "pair manifest must start with `{MANIFEST_HEADER}`, got {other:?}"
            )))
        }
    }
    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::Format(format!(
                "manifest line {} has {} fields, need 7",
                lineno + 2,
                f.len()
            )));
        }
        let label: u8 = f[5]
            .parse()
            .map_err(|_| Error::Format(format!("bad label `{}`", f[5])))?;
        if label > 1 {
            return Err(Error::Format(format!("label must be 0/1, got {label}")));
        }
        pairs.push(GenePair {
            pair_id: f[0].to_string(),
            scaffold_id: f[1].to_string(),
            gene_a: f[2].to_string(),
            gene_b: f[3].to_string(),
            igs: f[4]
                .parse()
                .map_err(|_| Error::Format(format!("bad igs `{}`", f[4])))?,
            same_strand: true,
            label,
            split: Split::parse(f[6])?,
        });
    }
    Ok(pairs)
}

pub fn read_pair_manifest(path: &Path) -> Result<Vec<GenePair>> {
    parse_pair_manifest(&fs::read_to_string(path)?)
}
