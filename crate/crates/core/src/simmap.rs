//! Embeddings and the cosine similarity kernel.
//!
//! Vectors come either from an external CSV store or from a hashed
//! bag-of-words over keywords. The hash is 64-bit FNV-1a over the UTF-8 bytes
//! of the lower-cased token (offset basis `0xcbf29ce484222325`, prime
//! `0x100000001b3`). For a hash `h`, the bucket is `(h >> 1) % dims` and the
//! sign is `+1` when `h` is even and `-1` when odd. Signed counts are summed
//! per bucket and the result is L2-normalized.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::manifest::{ClassLabel, Sample};

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
pub const MIN_KEYWORD_DIMS: usize = 8;
pub const DEFAULT_DIMS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("embedding has zero dimensions"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "embedding has a non-finite entry at index {pos}"
            )));
        }
        Ok(Self { values })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// `(x . y) / (|x| |y|)`, clamped to `[-1, 1]`.
///
/// Sums run in index order, so swapping the arguments gives the identical value.
pub fn cosine_similarity(x: &EmbeddingVector, y: &EmbeddingVector) -> Result<f64> {
    if x.dims() != y.dims() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            x.dims(),
            y.dims()
        )));
    }
    let (mut dot, mut xx, mut yy) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in x.values.iter().zip(&y.values) {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 {
        return Err(Error::ZeroNorm("left vector"));
    }
    if yy == 0.0 {
        return Err(Error::ZeroNorm("right vector"));
    }
    Ok((dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

pub fn keyword_embed<S: AsRef<str>>(tokens: &[S], dims: usize) -> Result<EmbeddingVector> {
    if dims < MIN_KEYWORD_DIMS {
        return Err(Error::validation(format!(
            "keyword embedding needs at least {MIN_KEYWORD_DIMS} dims, got {dims}"
        )));
    }
    if tokens.is_empty() {
        return Err(Error::validation("cannot embed an empty token list"));
    }
    let mut acc = vec![0i64; dims];
    for token in tokens {
        let h = fnv1a64(token.as_ref().to_lowercase().as_bytes());
        let bucket = ((h >> 1) % dims as u64) as usize;
        acc[bucket] += if h & 1 == 0 { 1 } else { -1 };
    }
    let norm = acc.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm("keyword embedding (hash buckets cancelled)"));
    }
    EmbeddingVector::new(acc.into_iter().map(|c| c as f64 / norm).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dims: usize,
    entries: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::validation("embedding store needs dims > 0"));
        }
        Ok(Self {
            dims,
            entries: BTreeMap::new(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&EmbeddingVector> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: EmbeddingVector) -> Result<()> {
        let key = key.into();
        if vector.dims() != self.dims {
            return Err(Error::validation(format!(
                "embedding '{key}' has {} dims, store expects {}",
                vector.dims(),
                self.dims
            )));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::validation(format!("duplicate embedding key '{key}'")));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    /// Loads `key,dim,v0,...,v{d-1}` CSV.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| bad(1, e.to_string()))?
            .clone();
        let dims = header.len().saturating_sub(2);
        let header_ok = header.get(0) == Some("key")
            && header.get(1) == Some("dim")
            && dims > 0
            && header
                .iter()
                .skip(2)
                .enumerate()
                .all(|(i, h)| h == format!("v{i}"));
        if !header_ok {
            return Err(bad(1, "expected header key,dim,v0,...,v{d-1}".into()));
        }

        let mut store = Self::new(dims)?;
        for (row_idx, record) in reader.records().enumerate() {
            let line = row_idx + 2;
            let record = record.map_err(|e| bad(line, e.to_string()))?;
            let key = record.get(0).unwrap_or_default();
            if key.is_empty() {
                return Err(bad(line, "empty key".into()));
            }
            let dim: usize = record
                .get(1)
                .unwrap_or_default()
                .parse()
                .map_err(|_| bad(line, "dim is not an integer".into()))?;
            if dim != dims {
                return Err(bad(line, format!("dim {dim} differs from header dim {dims}")));
            }
            let values = record
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(line, format!("bad value: {e}")))?;
            let vector = EmbeddingVector::new(values).map_err(|e| bad(line, e.to_string()))?;
            store
                .insert(key, vector)
                .map_err(|e| bad(line, e.to_string()))?;
        }
        Ok(store)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,dim");
        for i in 0..self.dims {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
        for (key, v) in &self.entries {
            out.push_str(&format!("{key},{}", self.dims));
            for x in v.values() {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Vector for a sample: its stored embedding when `embedding_ref` resolves,
/// otherwise the keyword embedding of its prompt keywords plus its class name.
pub fn class_vector(
    sample: &Sample,
    store: &EmbeddingStore,
    dims: usize,
) -> Result<EmbeddingVector> {
    if let Some(v) = sample.embedding_ref.as_deref().and_then(|k| store.get(k)) {
        return Ok(v.clone());
    }
    match &sample.prompt_keywords {
        Some(keywords) => {
            let tokens: BTreeSet<String> = keywords
                .iter()
                .map(|k| k.to_lowercase())
                .chain(std::iter::once(sample.class.as_str().to_owned()))
                .collect();
            let tokens: Vec<String> = tokens.into_iter().collect();
            keyword_embed(&tokens, dims)
        }
        None => Err(Error::Unscorable(sample.id.clone())),
    }
}

/// Vector for a real class: the store entry keyed by the class name, or the
/// keyword embedding of the name itself.
pub fn anchor_vector(
    class: &ClassLabel,
    store: &EmbeddingStore,
    dims: usize,
) -> Result<EmbeddingVector> {
    match store.get(class.as_str()) {
        Some(v) => Ok(v.clone()),
        None => keyword_embed(&[class.as_str()], dims),
    }
}
