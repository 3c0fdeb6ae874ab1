//! Versioned binary model checkpoints: config header, named parameter
//! tensors (row-major 64-bit values), and the RNG seed. Round-trips are
//! byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Parameterized;
use crate::scalar::Real;

use super::{AnyModel, ExpertKind, FusionConfig, ModelKind};

const MAGIC: &[u8; 8] = b"MFCKPT01";
const VERSION: u32 = 1;

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::MicroFuse => 0,
        ModelKind::ProstT5Only => 1,
        ModelKind::BacformerOnly => 2,
        ModelKind::ConcatMlp => 3,
    }
}

fn tag_kind(tag: u8) -> Result<ModelKind> {
    Ok(match tag {
        0 => ModelKind::MicroFuse,
        1 => ModelKind::ProstT5Only,
        2 => ModelKind::BacformerOnly,
        3 => ModelKind::ConcatMlp,
        other => return Err(Error::Format(format!("unknown model tag {other}"))),
    })
}

/// Serialize a model to the checkpoint byte format.
pub fn checkpoint_bytes<T: Real>(model: &mut AnyModel<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&model.seed().to_le_bytes());
    buf.push(kind_tag(model.kind()));
    let expert_mask: u8 = match model {
        AnyModel::Fusion(m) => {
            let mut mask = 0u8;
            for (i, kind) in ExpertKind::ALL.iter().enumerate() {
                if m.expert_kinds().contains(kind) {
                    mask |= 1 << i;
                }
            }
            mask
        }
        AnyModel::Baseline(_) => 0,
    };
    buf.push(expert_mask);
    let c = model.config();
    for dim in [
        c.protein_dim,
        c.genome_dim,
        c.latent_dim,
        c.expert_hidden_dim,
        c.router_hidden_dim,
        c.classifier_hidden_dim,
        c.concat_hidden_dims.0,
        c.concat_hidden_dims.1,
    ] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&c.dropout.to_le_bytes());

    let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
    model.visit_params(&mut |name, p| {
        tensors.push((
            name.to_string(),
            p.value.rows(),
            p.value.cols(),
            p.value.data().iter().map(|v| v.as_f64()).collect(),
        ));
    });
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, rows, cols, data) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(rows as u32).to_le_bytes());
        buf.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save_checkpoint<T: Real>(model: &mut AnyModel<T>, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(model))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Rebuild a model from checkpoint bytes.
pub fn load_checkpoint_bytes<T: Real>(bytes: &[u8]) -> Result<AnyModel<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let seed = r.u64()?;
    let kind = tag_kind(r.u8()?)?;
    let expert_mask = r.u8()?;
    let mut dims = [0usize; 8];
    for d in dims.iter_mut() {
        *d = r.u32()? as usize;
    }
    let dropout = r.f64()?;
    let config = FusionConfig {
        protein_dim: dims[0],
        genome_dim: dims[1],
        latent_dim: dims[2],
        expert_hidden_dim: dims[3],
        router_hidden_dim: dims[4],
        classifier_hidden_dim: dims[5],
        concat_hidden_dims: (dims[6], dims[7]),
        dropout,
    };
    let mut model: AnyModel<T> = match kind {
        ModelKind::MicroFuse => {
            let kinds: Vec<ExpertKind> = ExpertKind::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| expert_mask & (1 << i) != 0)
                .map(|(_, &k)| k)
                .collect();
            AnyModel::fusion_with_experts(&config, &kinds, seed)?
        }
        other => AnyModel::build(other, &config, seed)?,
    };

    let n_tensors = r.u32()? as usize;
    let mut tensors: BTreeMap<String, Matrix<T>> = BTreeMap::new();
    for _ in 0..n_tensors {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("tensor name is not utf-8".into()))?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(T::of(r.f64()?));
        }
        tensors.insert(name, Matrix::from_vec(rows, cols, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }

    let mut missing: Option<String> = None;
    let mut mismatched: Option<String> = None;
    model.visit_params(&mut |name, p| {
        match tensors.remove(name) {
            Some(t) if t.shape() == p.value.shape() => p.value = t,
            Some(_) => mismatched = Some(name.to_string()),
            None => missing = Some(name.to_string()),
        }
    });
    if let Some(name) = mismatched {
        return Err(Error::Format(format!("tensor `{name}` has wrong shape")));
    }
    if let Some(name) = missing {
        return Err(Error::Format(format!("checkpoint is missing tensor `{name}`")));
    }
    if let Some(name) = tensors.keys().next() {
        return Err(Error::Format(format!("checkpoint has unknown tensor `{name}`")));
    }
    Ok(model)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<AnyModel<T>> {
    load_checkpoint_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FusionConfig {
        FusionConfig::with_dims(6, 4, 5)
    }

    #[test]
    fn fusion_roundtrip_is_byte_identical() {
        let mut model = AnyModel::<f64>::build(ModelKind::MicroFuse, &toy(), 42).unwrap();
        let bytes = checkpoint_bytes(&mut model);
        let mut reloaded = load_checkpoint_bytes::<f64>(&bytes).unwrap();
        let bytes2 = checkpoint_bytes(&mut reloaded);
        assert_eq!(bytes, bytes2);
        assert_eq!(reloaded.kind(), ModelKind::MicroFuse);
        assert_eq!(reloaded.seed(), 42);
    }

    #[test]
    fn baseline_roundtrip_preserves_outputs() {
        let mut model = AnyModel::<f64>::build(ModelKind::ConcatMlp, &toy(), 7).unwrap();
        let xp = Matrix::from_fn(3, 6, |r, c| (r + c) as f64 * 0.1);
        let xb = Matrix::from_fn(3, 4, |r, c| (r * c) as f64 * 0.1 - 0.2);
        let before = model.forward_probs(&xp, &xb).unwrap();
        let bytes = checkpoint_bytes(&mut model);
        let reloaded = load_checkpoint_bytes::<f64>(&bytes).unwrap();
        let after = reloaded.forward_probs(&xp, &xb).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn ablated_expert_set_survives_roundtrip() {
        let kinds = [ExpertKind::Protein, ExpertKind::Genome, ExpertKind::Agreement];
        let mut model = AnyModel::<f64>::fusion_with_experts(&toy(), &kinds, 1).unwrap();
        let bytes = checkpoint_bytes(&mut model);
        let reloaded = load_checkpoint_bytes::<f64>(&bytes).unwrap();
        match reloaded {
            AnyModel::Fusion(m) => assert_eq!(m.expert_kinds(), kinds.to_vec()),
            _ => panic!("expected fusion model"),
        }
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let mut model = AnyModel::<f64>::build(ModelKind::ProstT5Only, &toy(), 3).unwrap();
        let bytes = checkpoint_bytes(&mut model);
        assert!(load_checkpoint_bytes::<f64>(&bytes[..bytes.len() - 4]).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(load_checkpoint_bytes::<f64>(&bad_magic).is_err());
        let mut trailing = bytes;
        trailing.push(0);
        assert!(load_checkpoint_bytes::<f64>(&trailing).is_err());
    }
}
