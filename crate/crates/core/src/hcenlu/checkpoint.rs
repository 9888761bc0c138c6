//! Single-file checkpoint: a text header with a JSON manifest (hyperparameters,
//! inventories, character vocabulary, BPE codec) followed by binary
//! parameter records `name, shape, f64 little-endian values`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::{CharVocab, ContextualEmbeddingProvider};
use crate::error::{Error, Result};
use crate::hcenlu::model::{HcenluModel, NluConfig};
use crate::hcenlu::pipeline::NluPipeline;
use crate::scalar::Scalar;
use crate::tensor::Parameterized;
use crate::text::BpeCodec;

const MAGIC: &str = "hcenlu-checkpoint v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: NluConfig,
    pub labels: Vec<String>,
    pub tags: Vec<String>,
    pub chars: CharVocab,
    pub codec: String,
}

pub fn to_bytes<T: Scalar>(p: &NluPipeline<T>) -> Result<Vec<u8>> {
    let manifest = Manifest {
        config: p.model.config.clone(),
        labels: p.model.labels.clone(),
        tags: p.model.tags.clone(),
        chars: p.model.char_cnn.vocab.clone(),
        codec: p.codec.to_text(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    let params = p.model.params();
    let mut out = format!("{MAGIC}\nmanifest {}\n{json}\nparams {}\n", json.len(), params.len()).into_bytes();
    for param in params {
        out.extend((param.name.len() as u32).to_le_bytes());
        out.extend(param.name.as_bytes());
        let shape = param.value.shape();
        out.extend((shape.len() as u32).to_le_bytes());
        for d in shape {
            out.extend((*d as u64).to_le_bytes());
        }
        for v in param.value.data() {
            out.extend(v.as_f64().to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save<T: Scalar>(p: &NluPipeline<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(p)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(bad(format!("truncated at byte {}", self.pos)));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let n = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing header line".into()))?;
        let s = std::str::from_utf8(&rest[..n]).map_err(|_| bad("header is not utf-8".into()))?;
        self.pos += n + 1;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn bad(detail: String) -> Error {
    Error::format("checkpoint", detail)
}

fn count_after(line: &str, key: &str) -> Result<usize> {
    line.strip_prefix(key)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(format!("expected `{key} <n>`, got `{line}`")))
}

fn header<'a>(c: &mut Cursor<'a>) -> Result<Manifest> {
    if c.line()? != MAGIC {
        return Err(bad("not an hcenlu checkpoint".into()));
    }
    let len = count_after(c.line()?, "manifest")?;
    let manifest = serde_json::from_slice(c.take(len)?)?;
    c.take(1)?;
    Ok(manifest)
}

/// Configuration, inventories and codec without the parameters.
pub fn read_manifest(bytes: &[u8]) -> Result<Manifest> {
    header(&mut Cursor { bytes, pos: 0 })
}

pub fn from_bytes<T: Scalar>(bytes: &[u8], provider: Arc<ContextualEmbeddingProvider>) -> Result<NluPipeline<T>> {
    let mut c = Cursor { bytes, pos: 0 };
    let manifest = header(&mut c)?;
    let count = count_after(c.line()?, "params")?;
    if manifest.config.ctx_dim != provider.dim() {
        return Err(Error::Param(format!(
            "checkpoint expects contextual vectors of dim {}, provider has {}",
            manifest.config.ctx_dim,
            provider.dim()
        )));
    }
    let codec = BpeCodec::from_text(&manifest.codec)?;
    let mut model: HcenluModel<T> = HcenluModel::new(
        manifest.config,
        manifest.labels,
        manifest.tags,
        manifest.chars,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let mut loaded: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
    for _ in 0..count {
        let n = c.u32()? as usize;
        let name = String::from_utf8(c.take(n)?.to_vec()).map_err(|_| bad("parameter name is not utf-8".into()))?;
        let rank = c.u32()? as usize;
        let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let values = c
            .take(len.checked_mul(8).ok_or_else(|| bad("parameter too large".into()))?)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        loaded.insert(name, (shape, values));
    }
    if c.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    for p in model.params_mut() {
        let (shape, values) = loaded
            .remove(&p.name)
            .ok_or_else(|| bad(format!("missing parameter `{}`", p.name)))?;
        if shape != p.value.shape() {
            return Err(bad(format!(
                "parameter `{}` has shape {shape:?}, model expects {:?}",
                p.name,
                p.value.shape()
            )));
        }
        for (dst, v) in p.value.data_mut().iter_mut().zip(values) {
            *dst = T::lit(v);
        }
    }
    if let Some(name) = loaded.keys().next() {
        return Err(bad(format!("unexpected parameter `{name}`")));
    }
    Ok(NluPipeline {
        model,
        codec,
        provider,
    })
}

pub fn load<T: Scalar>(path: impl AsRef<Path>, provider: Arc<ContextualEmbeddingProvider>) -> Result<NluPipeline<T>> {
    from_bytes(&fs::read(path)?, provider)
}
