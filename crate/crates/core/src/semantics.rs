//! Semantic scoring: embedding providers and cosine similarity.
//!
//! The built-in [`LexicalEmbedder`] uses signed feature hashing so that it is
//! deterministic across platforms and releases. Its hash is FNV-1a 64 over
//! the UTF-8 bytes of each lowercase token; the bucket is `hash % dim` and the
//! sign is `+1` when bit 63 of the hash is clear, `-1` otherwise. Changing
//! either breaks stored vectors, so treat them as part of the format.
//!
//! [`PrecomputedEmbeddings`] serves vectors produced elsewhere (for example a
//! transformer model) from a JSONL file of `{"id": ..., "vector": [...]}`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("no stored embedding for {0:?}")]
    Missing(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding dimension must be positive")]
    ZeroDim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Cosine similarity. A zero vector on either side scores 0 (check
/// [`Embedding::is_zero`] to tell that apart from orthogonality).
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, SemanticsError> {
    if a.dim() != b.dim() {
        return Err(SemanticsError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Embedding, SemanticsError>;
    fn dim(&self) -> usize;
    /// Embeds a corpus document. Providers that store vectors by id can
    /// override this; the default embeds `text`.
    fn embed_document(&self, doc_id: &str, text: &str) -> Result<Embedding, SemanticsError> {
        let _ = doc_id;
        self.embed(text)
    }
    /// Short identifier recorded in reports.
    fn tag(&self) -> String;
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercase alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexicalEmbedder {
    dim: usize,
}

impl LexicalEmbedder {
    pub const DEFAULT_DIM: usize = 512;

    pub fn new(dim: usize) -> Result<Self, SemanticsError> {
        if dim == 0 {
            return Err(SemanticsError::ZeroDim);
        }
        Ok(Self { dim })
    }

    pub fn bucket(&self, token: &str) -> (usize, f64) {
        let h = fnv1a64(token.as_bytes());
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        ((h % self.dim as u64) as usize, sign)
    }
}

impl Default for LexicalEmbedder {
    fn default() -> Self {
        Self {
            dim: Self::DEFAULT_DIM,
        }
    }
}

impl EmbeddingProvider for LexicalEmbedder {
    /// Text without tokens embeds to the zero vector.
    fn embed(&self, text: &str) -> Result<Embedding, SemanticsError> {
        let mut values = vec![0.0; self.dim];
        for token in tokenize(text) {
            let (idx, sign) = self.bucket(&token);
            values[idx] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Ok(Embedding { values })
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn tag(&self) -> String {
        format!("lexical-{}", self.dim)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredVector {
    id: String,
    vector: Vec<f64>,
}

/// Key under which a text's vector is stored: hex FNV-1a 64 of the text.
pub fn text_key(text: &str) -> String {
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

/// Embeddings loaded from disk, looked up by exact text or by [`text_key`].
#[derive(Debug, Clone)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    vectors: HashMap<String, Embedding>,
    source: String,
}

impl PrecomputedEmbeddings {
    pub fn load(path: &Path) -> Result<Self, SemanticsError> {
        let io = |source| SemanticsError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::open(path).map_err(io)?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let fmt_err = |message: String| SemanticsError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let row: StoredVector =
                serde_json::from_str(&line).map_err(|e| fmt_err(e.to_string()))?;
            let expected = *dim.get_or_insert(row.vector.len());
            if row.vector.len() != expected {
                return Err(fmt_err(format!(
                    "vector for {:?} has dimension {}, expected {expected}",
                    row.id,
                    row.vector.len()
                )));
            }
            if row.vector.iter().any(|v| !v.is_finite()) {
                return Err(fmt_err(format!(
                    "vector for {:?} has non-finite entries",
                    row.id
                )));
            }
            vectors.insert(row.id, Embedding::new(row.vector));
        }
        let dim = match dim {
            Some(0) | None => return Err(SemanticsError::ZeroDim),
            Some(d) => d,
        };
        Ok(Self {
            dim,
            vectors,
            source: path.display().to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Writes `(id, vector)` rows in the format [`PrecomputedEmbeddings::load`] reads.
pub fn save_precomputed(path: &Path, rows: &[(String, Embedding)]) -> Result<(), SemanticsError> {
    let io = |source| SemanticsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for (id, e) in rows {
        let row = StoredVector {
            id: id.clone(),
            vector: e.values.clone(),
        };
        serde_json::to_writer(&mut w, &row).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn embed(&self, text: &str) -> Result<Embedding, SemanticsError> {
        self.vectors
            .get(text)
            .or_else(|| self.vectors.get(&text_key(text)))
            .cloned()
            .ok_or_else(|| SemanticsError::Missing(text.to_string()))
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_document(&self, doc_id: &str, text: &str) -> Result<Embedding, SemanticsError> {
        match self.vectors.get(doc_id) {
            Some(e) => Ok(e.clone()),
            None => self.embed(text),
        }
    }

    fn tag(&self) -> String {
        format!("precomputed:{}", self.source)
    }
}
