//! Binary checkpoint container for trained models.
//!
//! Layout: an 8-byte magic, a little-endian u32 version, string metadata
//! sorted by key, then named tensors with explicit shapes and raw f64
//! little-endian data. Everything is length-prefixed and loading is
//! bounds-checked; `load(save(m))` reproduces `m` bit for bit.

use crate::embedding::CompositionScheme;
use crate::error::{Error, Result};
use crate::lyrics_lm::LyricsLm;
use crate::melody::{MelodyConfig, MelodyModel};
use crate::nn::{LstmParams, Matrix, Tensors};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 8] = b"LTMNCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn from_model(meta: BTreeMap<String, String>, model: &impl Tensors) -> Self {
        Checkpoint {
            meta,
            tensors: model
                .tensors()
                .into_iter()
                .map(|(name, m)| (name, m.clone()))
                .collect(),
        }
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::checkpoint(format!("missing metadata key {key:?}")))
    }

    pub fn meta_usize(&self, key: &str) -> Result<usize> {
        self.meta_str(key)?
            .parse()
            .map_err(|_| Error::checkpoint(format!("metadata {key:?} is not an integer")))
    }

    /// Copies the stored tensors into `model`, requiring identical names,
    /// order, and shapes.
    pub fn apply_to(&self, model: &mut impl Tensors) -> Result<()> {
        let mut targets = model.tensors_mut();
        if targets.len() != self.tensors.len() {
            return Err(Error::checkpoint(format!(
                "checkpoint holds {} tensors, model has {}",
                self.tensors.len(),
                targets.len()
            )));
        }
        for ((name, stored), (want_name, target)) in self.tensors.iter().zip(&mut targets) {
            if name != want_name {
                return Err(Error::checkpoint(format!(
                    "tensor {name:?} where model expects {want_name:?}"
                )));
            }
            if stored.rows() != target.rows() || stored.cols() != target.cols() {
                return Err(Error::checkpoint(format!(
                    "tensor {name:?} is {}x{}, model expects {}x{}",
                    stored.rows(),
                    stored.cols(),
                    target.rows(),
                    target.cols()
                )));
            }
            target.data_mut().copy_from_slice(stored.data());
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            push_str(&mut out, k);
            push_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, m) in &self.tensors {
            push_str(&mut out, name);
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::checkpoint("bad magic; not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut meta = BTreeMap::new();
        let meta_len = r.u32()?;
        for _ in 0..meta_len {
            let k = r.string()?;
            let v = r.string()?;
            if meta.insert(k.clone(), v).is_some() {
                return Err(Error::checkpoint(format!("duplicate metadata key {k:?}")));
            }
        }
        let mut tensors = Vec::new();
        let tensor_len = r.u32()?;
        for _ in 0..tensor_len {
            let name = r.string()?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::checkpoint("tensor shape overflows"))?;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
            }
            let m = Matrix::from_vec(rows, cols, data)
                .map_err(|e| Error::checkpoint(format!("tensor {name:?}: {e}")))?;
            tensors.push((name, m));
        }
        if r.pos != bytes.len() {
            return Err(Error::checkpoint(format!(
                "{} trailing bytes after checkpoint data",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64> {
        let bytes = self.to_bytes();
        fs::write(path.as_ref(), &bytes).map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(bytes.len() as u64)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_bytes(&bytes)
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::checkpoint("file truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::checkpoint("string field is not valid UTF-8"))
    }
}

/// Bundles a trained language model with the composition scheme it expects.
pub fn lyrics_lm_checkpoint(lm: &LyricsLm, scheme: CompositionScheme) -> Checkpoint {
    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), "lyrics_lm".into());
    meta.insert("scheme".into(), scheme.name().into());
    meta.insert("embed_dim".into(), lm.embed_dim.to_string());
    meta.insert("hidden".into(), lm.hidden.to_string());
    meta.insert("vocab_size".into(), lm.vocab_size.to_string());
    Checkpoint::from_model(meta, lm)
}

pub fn lyrics_lm_from_checkpoint(ckpt: &Checkpoint) -> Result<(LyricsLm, CompositionScheme)> {
    let kind = ckpt.meta_str("kind")?;
    if kind != "lyrics_lm" {
        return Err(Error::checkpoint(format!(
            "checkpoint kind {kind:?} is not a language model"
        )));
    }
    let scheme = CompositionScheme::parse(ckpt.meta_str("scheme")?)?;
    let embed_dim = ckpt.meta_usize("embed_dim")?;
    let hidden = ckpt.meta_usize("hidden")?;
    let vocab_size = ckpt.meta_usize("vocab_size")?;
    let mut lm = LyricsLm {
        embed_dim,
        hidden,
        vocab_size,
        lstm: LstmParams::zeros(embed_dim, hidden),
        proj_w: Matrix::zeros(vocab_size, hidden),
        proj_b: Matrix::zeros(vocab_size, 1),
    };
    ckpt.apply_to(&mut lm)?;
    Ok((lm, scheme))
}

/// Bundles a trained melody model with the composition scheme it expects.
pub fn melody_checkpoint(model: &MelodyModel, scheme: CompositionScheme) -> Checkpoint {
    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), "melody".into());
    meta.insert("scheme".into(), scheme.name().into());
    meta.insert("input_dim".into(), model.cfg.input_dim.to_string());
    meta.insert("hidden".into(), model.cfg.hidden.to_string());
    meta.insert("attn_dim".into(), model.cfg.attn_dim.to_string());
    meta.insert("attr_emb_dim".into(), model.cfg.attr_emb_dim.to_string());
    Checkpoint::from_model(meta, model)
}

pub fn melody_from_checkpoint(ckpt: &Checkpoint) -> Result<(MelodyModel, CompositionScheme)> {
    let kind = ckpt.meta_str("kind")?;
    if kind != "melody" {
        return Err(Error::checkpoint(format!(
            "checkpoint kind {kind:?} is not a melody model"
        )));
    }
    let scheme = CompositionScheme::parse(ckpt.meta_str("scheme")?)?;
    let cfg = MelodyConfig {
        input_dim: ckpt.meta_usize("input_dim")?,
        hidden: ckpt.meta_usize("hidden")?,
        attn_dim: ckpt.meta_usize("attn_dim")?,
        attr_emb_dim: ckpt.meta_usize("attr_emb_dim")?,
    };
    let mut model = MelodyModel::zeros(cfg)?;
    ckpt.apply_to(&mut model)?;
    Ok((model, scheme))
}
