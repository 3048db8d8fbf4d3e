//! Base token embeddings and the `EMB1` binary table format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "EMB1" | u32 d | u64 rows | rows × ( u16 len | len bytes token | d × f32 )
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BaseVector, EmbedError, Result};

const MAGIC: &[u8; 4] = b"EMB1";

/// Token → `f(t) ∈ ℝ^d`, stored as `f32`.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    rows: HashMap<String, u32>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: &[f32]) -> Result<u32> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(EmbedError::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        if token.len() > usize::from(u16::MAX) {
            return Err(EmbedError::TableFormat(format!("token longer than {} bytes", u16::MAX)));
        }
        if self.rows.contains_key(&token) {
            return Err(EmbedError::TableFormat(format!("duplicate token {token:?}")));
        }
        let row = self.tokens.len() as u32;
        self.rows.insert(token.clone(), row);
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(row)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn row_of(&self, token: &str) -> Option<u32> {
        self.rows.get(token).copied()
    }

    pub fn token(&self, row: u32) -> &str {
        &self.tokens[row as usize]
    }

    pub fn row(&self, row: u32) -> &[f32] {
        let start = row as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.row_of(token).map(|r| self.row(r))
    }

    pub fn base_vector(&self, row: u32) -> BaseVector {
        BaseVector::from_f32(self.row(row)).expect("table rows are finite")
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Deterministic stand-in for real embeddings: each token gets a unit
    /// Gaussian direction seeded from an FNV-1a hash of its bytes and `seed`.
    /// Meant for fixtures and smoke runs, not for retrieval quality.
    pub fn from_hashed_tokens<I, S>(tokens: I, dim: usize, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = Self::new(dim);
        for token in tokens {
            let token = token.as_ref();
            if table.row_of(token).is_some() {
                continue;
            }
            table.insert(token, &hashed_unit_vector(token, dim, seed))?;
        }
        Ok(table)
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(EmbedError::TableFormat("bad magic".into()));
        }
        let dim = read_u32(&mut r)? as usize;
        let rows = read_u64(&mut r)?;
        if dim == 0 {
            return Err(EmbedError::TableFormat("zero dimension".into()));
        }
        let mut table = Self::new(dim);
        let mut buf = vec![0u8; dim * 4];
        let mut vector = vec![0f32; dim];
        for _ in 0..rows {
            let mut len = [0u8; 2];
            r.read_exact(&mut len).map_err(truncated)?;
            let mut token = vec![0u8; usize::from(u16::from_le_bytes(len))];
            r.read_exact(&mut token).map_err(truncated)?;
            let token = String::from_utf8(token)
                .map_err(|_| EmbedError::TableFormat("token is not UTF-8".into()))?;
            r.read_exact(&mut buf).map_err(truncated)?;
            for (v, chunk) in vector.iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            table.insert(token, &vector)?;
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(EmbedError::TableFormat("trailing bytes after last row".into()));
        }
        Ok(table)
    }

    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut w = BufWriter::new(writer);
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.tokens.len() as u64).to_le_bytes())?;
        for (i, token) in self.tokens.iter().enumerate() {
            w.write_all(&(token.len() as u16).to_le_bytes())?;
            w.write_all(token.as_bytes())?;
            for v in self.row(i as u32) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(File::create(path)?)
    }
}

fn truncated(e: std::io::Error) -> EmbedError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        EmbedError::TableFormat("truncated".into())
    } else {
        EmbedError::Io(e)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub(crate) fn hashed_unit_vector(token: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ seed);
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x / n) as f32).collect()
}
