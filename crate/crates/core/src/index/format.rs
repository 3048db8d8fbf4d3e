//! Fixed-width little-endian file layouts of an index directory.
//!
//! | file                | content                                                        |
//! |---------------------|----------------------------------------------------------------|
//! | `header.bin`        | `"ISO1"`, u32 version, u32 d, u64 jl_seed, u64 N, u64 V, u64 min_count |
//! | `offsets.bin`       | N × (u64 doc_id, u64 sidecar_offset, u64 sidecar_length)       |
//! | `doc_vectors.i8`    | N × 256 int8, row-major                                        |
//! | `vocab.bin`         | see [`super::Vocabulary`]                                      |
//! | `token_vectors.i8`  | V × 256 int8, row-major                                        |
//! | `projector.bin`     | `"PRJ1"`, u32 d, u32 m, m × d f64 basis, d f64 reference mean  |

use std::io::{Read, Write};

use crate::embed::{BaseVector, Projector};

use super::{DocLocator, IndexError, Result};

pub const HEADER_FILE: &str = "header.bin";
pub const OFFSETS_FILE: &str = "offsets.bin";
pub const DOC_VECTORS_FILE: &str = "doc_vectors.i8";
pub const VOCAB_FILE: &str = "vocab.bin";
pub const TOKEN_VECTORS_FILE: &str = "token_vectors.i8";
pub const PROJECTOR_FILE: &str = "projector.bin";

/// Files whose bytes are fully determined by the build inputs.
pub const INDEX_FILES: [&str; 6] =
    [HEADER_FILE, OFFSETS_FILE, DOC_VECTORS_FILE, VOCAB_FILE, TOKEN_VECTORS_FILE, PROJECTOR_FILE];

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 * 4;
pub const OFFSET_RECORD_LEN: usize = 24;

const HEADER_MAGIC: &[u8; 4] = b"ISO1";
const PROJECTOR_MAGIC: &[u8; 4] = b"PRJ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexHeader {
    pub version: u32,
    pub dim: u32,
    pub jl_seed: u64,
    pub n_docs: u64,
    pub n_tokens: u64,
    pub min_count: u64,
}

impl IndexHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(HEADER_MAGIC);
        out[4..8].copy_from_slice(&self.version.to_le_bytes());
        out[8..12].copy_from_slice(&self.dim.to_le_bytes());
        out[12..20].copy_from_slice(&self.jl_seed.to_le_bytes());
        out[20..28].copy_from_slice(&self.n_docs.to_le_bytes());
        out[28..36].copy_from_slice(&self.n_tokens.to_le_bytes());
        out[36..44].copy_from_slice(&self.min_count.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != HEADER_LEN {
            return Err(IndexError::CorruptIndex(format!(
                "header is {} bytes, expected {HEADER_LEN}",
                bytes.len()
            )));
        }
        if &bytes[0..4] != HEADER_MAGIC {
            return Err(IndexError::CorruptIndex("header magic is not ISO1".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let header = Self {
            version: u32_at(4),
            dim: u32_at(8),
            jl_seed: u64_at(12),
            n_docs: u64_at(20),
            n_tokens: u64_at(28),
            min_count: u64_at(36),
        };
        if header.version != FORMAT_VERSION {
            return Err(IndexError::CorruptIndex(format!("unsupported format version {}", header.version)));
        }
        Ok(header)
    }
}

pub fn write_locator(w: &mut impl Write, loc: &DocLocator) -> std::io::Result<()> {
    w.write_all(&loc.doc_id.to_le_bytes())?;
    w.write_all(&loc.sidecar_offset.to_le_bytes())?;
    w.write_all(&loc.sidecar_length.to_le_bytes())
}

pub fn read_locators(bytes: &[u8]) -> Result<Vec<DocLocator>> {
    if bytes.len() % OFFSET_RECORD_LEN != 0 {
        return Err(IndexError::CorruptIndex("offsets file is not a whole number of records".into()));
    }
    Ok(bytes
        .chunks_exact(OFFSET_RECORD_LEN)
        .map(|c| DocLocator {
            doc_id: u64::from_le_bytes(c[0..8].try_into().unwrap()),
            sidecar_offset: u64::from_le_bytes(c[8..16].try_into().unwrap()),
            sidecar_length: u64::from_le_bytes(c[16..24].try_into().unwrap()),
        })
        .collect())
}

pub fn write_projector(w: &mut impl Write, p: &Projector) -> std::io::Result<()> {
    w.write_all(PROJECTOR_MAGIC)?;
    w.write_all(&(p.base_dim() as u32).to_le_bytes())?;
    w.write_all(&(p.basis().len() as u32).to_le_bytes())?;
    for v in p.basis().iter().chain(std::iter::once(p.projected_mean())) {
        for x in v.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_projector(mut r: impl Read) -> Result<Projector> {
    let corrupt = |why: String| IndexError::CorruptIndex(format!("projector: {why}"));
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != PROJECTOR_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != (m + 1) * d * 8 {
        return Err(corrupt(format!("expected {} payload bytes, found {}", (m + 1) * d * 8, body.len())));
    }
    let mut vectors = body
        .chunks_exact(d * 8)
        .map(|row| {
            let xs = row.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            BaseVector::new(xs).map_err(|e| corrupt(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = vectors.pop().ok_or_else(|| corrupt("missing mean".into()))?;
    Projector::from_parts(vectors, mean).map_err(|e| corrupt(e.to_string()))
}
