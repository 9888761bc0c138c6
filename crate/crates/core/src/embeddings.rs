//! Token embeddings: a frozen contextual vector per subword concatenated
//! with a trainable character-CNN vector of the subword's surface string.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Parameterized, Tensor};
use crate::text::TokenizedUtterance;

pub const DEFAULT_CTX_DIM: usize = 768;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Key under which a sentence's vectors are stored.
pub fn sentence_key(text: &str) -> u64 {
    fnv1a(crate::text::normalize(text).as_bytes())
}

/// Frozen source of contextual subword vectors.
///
/// Vectors come from a precomputed store keyed by (sentence, subword index);
/// anything missing falls back to a deterministic projection seeded by the
/// hash of the subword string.
#[derive(Debug, Clone, Default)]
pub struct ContextualEmbeddingProvider {
    dim: usize,
    store: HashMap<(u64, u32), Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmbedStats {
    pub hits: usize,
    pub fallbacks: usize,
}

impl EmbedStats {
    pub fn fallback_fraction(&self) -> f64 {
        let n = self.hits + self.fallbacks;
        if n == 0 {
            0.0
        } else {
            self.fallbacks as f64 / n as f64
        }
    }
}

impl ContextualEmbeddingProvider {
    /// A provider with an empty store; every vector is a fallback.
    pub fn hash_only(dim: usize) -> Self {
        ContextualEmbeddingProvider {
            dim,
            store: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stored(&self) -> usize {
        self.store.len()
    }

    pub fn insert(&mut self, key: u64, index: u32, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(
                "embedding store",
                format!("vector of dim {} in a store of dim {}", vector.len(), self.dim),
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite stored vector for ({key:016x}, {index})")));
        }
        self.store.insert((key, index), vector);
        Ok(())
    }

    pub fn fallback(&self, piece: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(piece.as_bytes()));
        (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// One vector per subword of `tok`.
    pub fn embed<T: Scalar>(&self, tok: &TokenizedUtterance, stats: &mut EmbedStats) -> Vec<Vec<T>> {
        let key = sentence_key(&tok.raw);
        tok.pieces
            .iter()
            .enumerate()
            .map(|(i, piece)| {
                let v = match self.store.get(&(key, i as u32)) {
                    Some(v) => {
                        stats.hits += 1;
                        v.clone()
                    }
                    None => {
                        stats.fallbacks += 1;
                        self.fallback(piece)
                    }
                };
                v.into_iter().map(T::lit).collect()
            })
            .collect()
    }

    /// Vector for a single pseudo-token such as a speaker marker.
    pub fn embed_marker<T: Scalar>(&self, marker: &str) -> Vec<T> {
        self.fallback(marker).into_iter().map(T::lit).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.store.len() as u64).to_le_bytes())?;
        let mut keys: Vec<&(u64, u32)> = self.store.keys().collect();
        keys.sort();
        for k in keys {
            w.write_all(&k.0.to_le_bytes())?;
            w.write_all(&k.1.to_le_bytes())?;
            for v in &self.store[k] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a store file. Any truncation, trailing bytes or non-finite
    /// value is reported here.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        let corrupt = |detail: String| Error::format("embedding store", detail);
        if bytes.len() < 12 {
            return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let dim = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let record = 12 + 8 * dim;
        let expected = count.checked_mul(record).and_then(|n| n.checked_add(12));
        if expected != Some(bytes.len()) {
            return Err(corrupt(format!(
                "header promises {count} records of dim {dim}, file has {} bytes",
                bytes.len()
            )));
        }
        let mut provider = Self::hash_only(dim);
        for chunk in bytes[12..].chunks_exact(record) {
            let key = u64::from_le_bytes(chunk[0..8].try_into().unwrap());
            let index = u32::from_le_bytes(chunk[8..12].try_into().unwrap());
            let v = chunk[12..]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            provider
                .insert(key, index, v)
                .map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(provider)
    }

    /// Reads an external dump with one `sentence<TAB>position<TAB>floats`
    /// line per subword vector.
    pub fn ingest<R: BufRead>(reader: R, dim: usize) -> Result<Self> {
        let mut provider = Self::hash_only(dim);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |d: &str| Error::format("embedding dump", format!("line {}: {d}", n + 1));
            let mut parts = line.splitn(3, '\t');
            let (Some(sentence), Some(pos), Some(floats)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected sentence, position and vector separated by tabs"));
            };
            let index: u32 = pos.trim().parse().map_err(|_| bad("position is not an integer"))?;
            let v = floats
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("vector has a non-numeric entry"))?;
            provider
                .insert(sentence_key(sentence), index, v)
                .map_err(|e| bad(&e.to_string()))?;
        }
        Ok(provider)
    }

    pub fn ingest_file(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        Self::ingest(BufReader::new(File::open(path)?), dim)
    }
}

pub const CHAR_PAD: u32 = 0;
pub const CHAR_UNK: u32 = 1;

/// Character inventory of the CNN. Id 0 pads, id 1 is unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharVocab {
    chars: BTreeMap<char, u32>,
}

impl CharVocab {
    pub fn build<S: AsRef<str>>(texts: &[S]) -> Self {
        let mut set: Vec<char> = texts.iter().flat_map(|t| t.as_ref().chars()).collect();
        set.sort_unstable();
        set.dedup();
        let chars = set
            .into_iter()
            .filter(|c| !c.is_whitespace())
            .enumerate()
            .map(|(i, c)| (c, i as u32 + 2))
            .collect();
        CharVocab { chars }
    }

    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> u32 {
        self.chars.get(&c).copied().unwrap_or(CHAR_UNK)
    }

    pub fn encode(&self, word: &str) -> Vec<u32> {
        word.chars().map(|c| self.id(c)).collect()
    }
}

/// Width-`k` convolution over character embeddings, tanh, then max over
/// positions. The word is padded with `k / 2` pad characters on each side.
/// The pad character embeds to zero and has no row in `embedding`; row
/// `id - 1` belongs to character `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharCnn<T> {
    pub vocab: CharVocab,
    pub embedding: Parameter<T>,
    pub filters: Parameter<T>,
    pub bias: Parameter<T>,
    pub char_dim: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct CharCnnCache {
    padded: Vec<u32>,
    /// Winning window per filter.
    argmax: Vec<usize>,
    /// tanh output at the winning window, per filter.
    value: Vec<f64>,
}

impl<T: Scalar> CharCnn<T> {
    pub fn new<R: Rng + ?Sized>(
        vocab: CharVocab,
        char_dim: usize,
        n_filters: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if width == 0 || width.is_multiple_of(2) {
            return Err(Error::Param(format!("char cnn width {width} must be odd")));
        }
        if char_dim == 0 || n_filters == 0 {
            return Err(Error::Param("char cnn dims must be positive".into()));
        }
        let embedding = Parameter::new(
            "char_cnn.embedding",
            Tensor::uniform(&[vocab.len() - 1, char_dim], 1.0, rng),
        );
        Ok(CharCnn {
            vocab,
            embedding,
            filters: Parameter::weight("char_cnn.filters", n_filters, width * char_dim, rng),
            bias: Parameter::zeros("char_cnn.bias", &[n_filters]),
            char_dim,
            width,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.bias.value.len()
    }

    fn pad(&self, chars: &[u32]) -> Vec<u32> {
        let p = self.width / 2;
        let mut v = vec![CHAR_PAD; p];
        v.extend_from_slice(chars);
        v.extend(std::iter::repeat_n(CHAR_PAD, p));
        v
    }

    /// Forward over pre-encoded character ids. Empty input gives a zero
    /// vector and a cache whose backward is a no-op.
    pub fn forward_ids(&self, chars: &[u32]) -> (Vec<T>, CharCnnCache) {
        let nf = self.n_filters();
        if chars.is_empty() {
            let cache = CharCnnCache {
                padded: Vec::new(),
                argmax: Vec::new(),
                value: Vec::new(),
            };
            return (vec![T::zero(); nf], cache);
        }
        let padded = self.pad(chars);
        let d = self.char_dim;
        let span = self.width * d;
        let windows = padded.len() + 1 - self.width;
        let emb = self.embedding.value.data();
        let filt = self.filters.value.data();
        let bias = self.bias.value.data();
        let mut window = vec![T::zero(); span];
        let mut best = vec![T::neg_infinity(); nf];
        let mut argmax = vec![0; nf];
        for t in 0..windows {
            for j in 0..self.width {
                let block = &mut window[j * d..(j + 1) * d];
                match padded[t + j] as usize {
                    0 => block.fill(T::zero()),
                    c => block.copy_from_slice(&emb[(c - 1) * d..c * d]),
                }
            }
            for f in 0..nf {
                let row = &filt[f * span..(f + 1) * span];
                let mut z = bias[f];
                for (a, b) in row.iter().zip(&window) {
                    z += *a * *b;
                }
                let y = z.tanh();
                if y > best[f] {
                    best[f] = y;
                    argmax[f] = t;
                }
            }
        }
        let value = best.iter().map(|v| v.as_f64()).collect();
        (best, CharCnnCache { padded, argmax, value })
    }

    pub fn forward(&self, word: &str) -> (Vec<T>, CharCnnCache) {
        self.forward_ids(&self.vocab.encode(word))
    }

    /// Accumulates gradients for `d_out` (one entry per filter).
    pub fn backward(&mut self, cache: &CharCnnCache, d_out: &[T]) {
        if cache.padded.is_empty() {
            return;
        }
        let d = self.char_dim;
        let span = self.width * d;
        for (f, &g) in d_out.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            let y = T::lit(cache.value[f]);
            let dz = g * (T::one() - y * y);
            let t = cache.argmax[f];
            self.bias.grad.data_mut()[f] += dz;
            for j in 0..self.width {
                let c = cache.padded[t + j] as usize;
                if c == CHAR_PAD as usize {
                    continue;
                }
                for k in 0..d {
                    let w_idx = f * span + j * d + k;
                    let e_idx = (c - 1) * d + k;
                    self.filters.grad.data_mut()[w_idx] += dz * self.embedding.value.data()[e_idx];
                    self.embedding.grad.data_mut()[e_idx] += dz * self.filters.value.data()[w_idx];
                }
            }
        }
    }
}

impl<T: Scalar> Parameterized<T> for CharCnn<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![&self.embedding, &self.filters, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.embedding, &mut self.filters, &mut self.bias]
    }
}

/// Contextual vector concatenated with the CNN vector of each subword.
pub fn token_embed<T: Scalar>(
    tok: &TokenizedUtterance,
    provider: &ContextualEmbeddingProvider,
    cnn: &CharCnn<T>,
) -> Vec<Vec<T>> {
    let mut stats = EmbedStats::default();
    provider
        .embed::<T>(tok, &mut stats)
        .into_iter()
        .zip(&tok.pieces)
        .map(|(mut v, piece)| {
            v.extend(cnn.forward(piece).0);
            v
        })
        .collect()
}
