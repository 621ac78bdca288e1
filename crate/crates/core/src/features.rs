//! Dense feature matrices aligned row-for-row with a corpus.
//!
//! `EMBV1` layout:
//!
//! ```text
//! EMBV1\n
//! {"count":C,"dim":D,"dtype":"f32le","source_tag":"..."}\n
//! C*D little-endian f32, row-major
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::fnv1a_extend;

pub const MAGIC: &[u8] = b"EMBV1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    source_tag: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    count: usize,
    dim: usize,
    dtype: String,
    source_tag: String,
}

impl EmbeddingMatrix {
    /// Builds a matrix from a flat row-major buffer.
    pub fn new(dim: usize, data: Vec<f32>, source_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dim must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "buffer of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(EmbeddingMatrix {
            dim,
            data,
            source_tag: source_tag.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], source_tag: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged embedding rows".into()));
        }
        Self::new(dim, rows.concat(), source_tag)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            dim: self.dim,
            data,
            source_tag: self.source_tag.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            count: self.rows(),
            dim: self.dim,
            dtype: "f32le".into(),
            source_tag: self.source_tag.clone(),
        };
        let mut out = Vec::with_capacity(64 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(serde_json::to_string(&header).expect("header").as_bytes());
        out.push(b'\n');
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Format("missing EMBV1 magic line".into()))?;
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("unterminated header line".into()))?;
        let header: Header = serde_json::from_slice(&rest[..nl])
            .map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.dtype != "f32le" {
            return Err(Error::Format(format!("unsupported dtype {:?}", header.dtype)));
        }
        if header.dim == 0 {
            return Err(Error::Format("dim must be positive".into()));
        }
        let payload = &rest[nl + 1..];
        let expected = header
            .count
            .checked_mul(header.dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("header count*dim overflows".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(header.dim, data, header.source_tag)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reads an `EMBV1` file and checks it has exactly `expected_rows` rows.
pub fn load_embeddings(path: &Path, expected_rows: usize) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = EmbeddingMatrix::from_bytes(&bytes)?;
    if m.rows() != expected_rows {
        return Err(Error::Alignment {
            found: m.rows(),
            expected: expected_rows,
        });
    }
    Ok(m)
}

/// Signed feature hashing of character 3/4/5-grams, L2-normalized per row.
pub fn hash_encode(corpus: &Corpus, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if dim < 2 {
        return Err(Error::Config(format!("hash_encode dim must be >= 2, got {dim}")));
    }
    let mut data = Vec::with_capacity(corpus.len() * dim);
    let mut row = vec![0f64; dim];
    let seed_bytes = seed.to_le_bytes();
    for ex in corpus.examples() {
        row.iter_mut().for_each(|v| *v = 0.0);
        let chars: Vec<char> = ex.text.chars().collect();
        let mut buf = String::new();
        for n in 3..=5 {
            for gram in chars.windows(n) {
                buf.clear();
                buf.extend(gram);
                let (index, sign) = hash_slot(&seed_bytes, buf.as_bytes(), dim);
                row[index] += sign;
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            data.extend(row.iter().map(|v| (v / norm) as f32));
        } else {
            data.extend(std::iter::repeat_n(0f32, dim));
        }
    }
    EmbeddingMatrix::new(dim, data, format!("hashed-ngram-{dim}"))
}

fn hash_slot(seed_bytes: &[u8; 8], gram: &[u8], dim: usize) -> (usize, f64) {
    let h = fnv1a_extend(crate::rng::fnv1a(seed_bytes), gram);
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    let index = ((h & (u64::MAX >> 1)) % dim as u64) as usize;
    (index, sign)
}
