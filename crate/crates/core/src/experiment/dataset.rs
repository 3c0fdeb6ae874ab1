//! Runtime dataset: normalized embedding store plus the split-assigned,
//! balanced pair list, with per-split row caches.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::data::{
    balance_splits, read_pair_manifest, read_store, scaffold_split, synth_generate, EmbeddingStore,
    GenePair, Split,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::config::DataSource;

#[derive(Debug, Clone)]
pub struct SplitView {
    /// Store row per pair, in pair order.
    pub rows: Vec<usize>,
    pub labels: Vec<u8>,
    pub scaffolds: Vec<String>,
    pub identities: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub store: EmbeddingStore<f64>,
    pub pairs: Vec<GenePair>,
    views: HashMap<Split, SplitView>,
}

impl Dataset {
    pub fn from_source(source: &DataSource) -> Result<Dataset> {
        match source {
            DataSource::Synthetic {
                world,
                n_pairs,
                fractions,
                split_seed,
            } => {
                let mut data = synth_generate::<f64>(world, *n_pairs)?;
                scaffold_split(&mut data.pairs, *fractions, *split_seed)?;
                let pairs = balance_splits(data.pairs, *split_seed);
                let identities: HashMap<String, f64> = pairs
                    .iter()
                    .map(|p| {
                        let row = data.store.row_of(&p.pair_id).expect("synth id");
                        (p.pair_id.clone(), data.identities[row])
                    })
                    .collect();
                Dataset::assemble(data.store, pairs, Some(identities))
            }
            DataSource::Files {
                store,
                manifest,
                identities,
            } => {
                let store = read_store::<f64>(store)?;
                let pairs = read_pair_manifest(manifest)?;
                let ids = match identities {
                    Some(path) => Some(read_identity_file(path)?),
                    None => None,
                };
                Dataset::assemble(store, pairs, ids)
            }
        }
    }

    fn assemble(
        mut store: EmbeddingStore<f64>,
        pairs: Vec<GenePair>,
        identities: Option<HashMap<String, f64>>,
    ) -> Result<Dataset> {
        let mut views: HashMap<Split, SplitView> = Split::ALL
            .iter()
            .map(|&s| {
                (
                    s,
                    SplitView {
                        rows: Vec::new(),
                        labels: Vec::new(),
                        scaffolds: Vec::new(),
                        identities: identities.as_ref().map(|_| Vec::new()),
                    },
                )
            })
            .collect();
        for pair in &pairs {
            let row = store.row_of(&pair.pair_id).ok_or_else(|| {
                Error::Domain(format!("pair `{}` missing from embedding store", pair.pair_id))
            })?;
            let view = views.get_mut(&pair.split).expect("split view");
            view.rows.push(row);
            view.labels.push(pair.label);
            view.scaffolds.push(pair.scaffold_id.clone());
            if let (Some(list), Some(map)) = (&mut view.identities, &identities) {
                let id = map.get(&pair.pair_id).copied().ok_or_else(|| {
                    Error::Domain(format!("pair `{}` missing from identity file", pair.pair_id))
                })?;
                list.push(id);
            }
        }
        let train_rows = views[&Split::Train].rows.clone();
        store.normalize(&train_rows)?;
        Ok(Dataset { store, pairs, views })
    }

    pub fn view(&self, split: Split) -> &SplitView {
        &self.views[&split]
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.views[&split].rows.len()
    }

    /// Gather the embedding matrices for a slice of store rows.
    pub fn gather(&self, rows: &[usize]) -> (Matrix<f64>, Matrix<f64>) {
        self.store.gather(rows)
    }

    pub fn positive_rate(&self, split: Split) -> f64 {
        let v = self.view(split);
        if v.labels.is_empty() {
            return 0.0;
        }
        v.labels.iter().filter(|&&y| y == 1).count() as f64 / v.labels.len() as f64
    }
}

const IDENTITY_HEADER: &str = "pair_id\tidentity";

pub fn write_identity_file(path: &Path, entries: &[(String, f64)]) -> Result<()> {
    let mut out = String::from(IDENTITY_HEADER);
    out.push('\n');
    for (id, v) in entries {
        out.push_str(&format!("{id}\t{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_identity_file(path: &Path) -> Result<HashMap<String, f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == IDENTITY_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "identity file must start with `{IDENTITY_HEADER}`, got {other:?}"
            )))
        }
    }
    let mut map = HashMap::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let (id, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("bad identity line `{line}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Format(format!("bad identity value `{v}`")))?;
        map.insert(id.to_string(), v);
    }
    Ok(map)
}
