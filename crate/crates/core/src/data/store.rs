//! Embedding storage: per-pair protein and genome-context vectors keyed by
//! pair id, train-statistics normalization, and the versioned binary file
//! format (32-bit floats on disk, widened in memory).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Per-dimension standardization statistics (population standard deviation,
/// floored at 1e-8).
#[derive(Debug, Clone)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore<T> {
    pair_ids: Vec<String>,
    index: HashMap<String, usize>,
    protein: Matrix<T>,
    genome: Matrix<T>,
    pub protein_stats: Option<NormStats<T>>,
    pub genome_stats: Option<NormStats<T>>,
}

impl<T: Real> EmbeddingStore<T> {
    pub fn new(pair_ids: Vec<String>, protein: Matrix<T>, genome: Matrix<T>) -> Result<Self> {
        if pair_ids.len() != protein.rows() || pair_ids.len() != genome.rows() {
            return Err(Error::Domain(format!(
                "store row counts disagree: {} ids, {} protein, {} genome",
                pair_ids.len(),
                protein.rows(),
                genome.rows()
            )));
        }
        protein.ensure_finite("protein embeddings")?;
        genome.ensure_finite("genome embeddings")?;
        let mut index = HashMap::with_capacity(pair_ids.len());
        for (i, id) in pair_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate pair id `{id}`")));
            }
        }
        Ok(EmbeddingStore {
            pair_ids,
            index,
            protein,
            genome,
            protein_stats: None,
            genome_stats: None,
        })
    }

    pub fn len(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_ids.is_empty()
    }

    pub fn pair_ids(&self) -> &[String] {
        &self.pair_ids
    }

    pub fn row_of(&self, pair_id: &str) -> Option<usize> {
        self.index.get(pair_id).copied()
    }

    pub fn protein(&self) -> &Matrix<T> {
        &self.protein
    }

    pub fn genome(&self) -> &Matrix<T> {
        &self.genome
    }

    pub fn protein_dim(&self) -> usize {
        self.protein.cols()
    }

    pub fn genome_dim(&self) -> usize {
        self.genome.cols()
    }

    pub fn is_normalized(&self) -> bool {
        self.protein_stats.is_some()
    }

    /// Gather both modality matrices for the given rows.
    pub fn gather(&self, rows: &[usize]) -> (Matrix<T>, Matrix<T>) {
        let mut xp = Matrix::zeros(rows.len(), self.protein.cols());
        let mut xb = Matrix::zeros(rows.len(), self.genome.cols());
        for (out_r, &r) in rows.iter().enumerate() {
            xp.row_mut(out_r).copy_from_slice(self.protein.row(r));
            xb.row_mut(out_r).copy_from_slice(self.genome.row(r));
        }
        (xp, xb)
    }

    /// Standardize every dimension of both modalities using statistics
    /// computed from `train_rows` only.
    pub fn normalize(&mut self, train_rows: &[usize]) -> Result<()> {
        if train_rows.is_empty() {
            return Err(Error::Domain("normalize requires a nonempty train split".into()));
        }
        if self.is_normalized() {
            return Err(Error::InvalidConfig("store is already normalized".into()));
        }
        let p_stats = Self::column_stats(&self.protein, train_rows);
        let g_stats = Self::column_stats(&self.genome, train_rows);
        Self::apply(&mut self.protein, &p_stats);
        Self::apply(&mut self.genome, &g_stats);
        self.protein_stats = Some(p_stats);
        self.genome_stats = Some(g_stats);
        Ok(())
    }

    fn column_stats(m: &Matrix<T>, rows: &[usize]) -> NormStats<T> {
        let n = T::of(rows.len() as f64);
        let cols = m.cols();
        let mut mean = vec![T::zero(); cols];
        for &r in rows {
            for (acc, &v) in mean.iter_mut().zip(m.row(r)) {
                *acc += v;
            }
        }
        for v in mean.iter_mut() {
            *v = *v / n;
        }
        let mut var = vec![T::zero(); cols];
        for &r in rows {
            for ((acc, &v), &mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        let floor = T::of(1e-8);
        let std = var
            .iter()
            .map(|&v| (v / n).sqrt().max(floor))
            .collect();
        NormStats { mean, std }
    }

    fn apply(m: &mut Matrix<T>, stats: &NormStats<T>) {
        for r in 0..m.rows() {
            for ((v, &mu), &sd) in m.row_mut(r).iter_mut().zip(&stats.mean).zip(&stats.std) {
                *v = (*v - mu) / sd;
            }
        }
    }
}

const MAGIC: &[u8; 8] = b"MFEMB001";
const VERSION: u32 = 1;

fn index_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".idx");
    PathBuf::from(os)
}

/// Write the store (current in-memory values, narrowed to f32) plus the
/// pair-id sidecar index.
pub fn write_store<T: Real>(path: &Path, store: &EmbeddingStore<T>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(store.protein_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(store.genome_dim() as u32).to_le_bytes());
    for &v in store.protein.data() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    for &v in store.genome.data() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, buf)?;

    let mut idx = String::from("pair_id\trow\n");
    for (i, id) in store.pair_ids().iter().enumerate() {
        idx.push_str(&format!("{id}\t{i}\n"));
    }
    fs::write(index_path(path), idx)?;
    Ok(())
}

/// Read a store and its sidecar index; values widen to the target scalar.
pub fn read_store<T: Real>(path: &Path) -> Result<EmbeddingStore<T>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(Error::Format("bad embedding store header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported store version {version}")));
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let p_dim = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    let g_dim = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
    let expected = 28 + 4 * n * (p_dim + g_dim);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "store size mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let mut offset = 28;
    let mut read_block = |rows: usize, cols: usize| -> Matrix<T> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let v = f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
            data.push(T::of(v as f64));
            offset += 4;
        }
        Matrix::from_vec(rows, cols, data).expect("sized block")
    };
    let protein = read_block(n, p_dim);
    let genome = read_block(n, g_dim);

    let idx_text = fs::read_to_string(index_path(path))?;
    let mut lines = idx_text.lines();
    match lines.next() {
        Some("pair_id\trow") => {}
        other => return Err(Error::Format(format!("bad index header {other:?}"))),
    }
    let mut pair_ids = vec![String::new(); n];
    let mut seen = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let (id, row) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("bad index line `{line}`")))?;
        let row: usize = row
            .parse()
            .map_err(|_| Error::Format(format!("bad row `{row}`")))?;
        if row >= n {
            return Err(Error::Format(format!("index row {row} out of range")));
        }
        pair_ids[row] = id.to_string();
        seen += 1;
    }
    if seen != n {
        return Err(Error::Format(format!("index has {seen} rows, store has {n}")));
    }
    EmbeddingStore::new(pair_ids, protein, genome)
}
