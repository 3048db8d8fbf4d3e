//! Corpus vocabulary with frequency-based survival.
//!
//! On disk (`vocab.bin`), little-endian:
//!
//! ```text
//! "VOC1" | u64 V | V × ( u32 len | len bytes token | u64 corpus_count )
//! ```
//!
//! Entries are stored in id order, which is lexicographic byte order of the
//! token strings.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::{IndexError, Result, SidecarRecord};

const MAGIC: &[u8; 4] = b"VOC1";

/// Default survival threshold for vocabulary tokens.
pub const DEFAULT_MIN_COUNT: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token: String,
    pub corpus_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Entries must already be sorted and unique.
    fn from_sorted(entries: Vec<VocabEntry>) -> Self {
        let ids = entries.iter().enumerate().map(|(i, e)| (e.token.clone(), i as u32)).collect();
        Self { entries, ids }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn entry(&self, id: u32) -> Option<&VocabEntry> {
        self.entries.get(id as usize)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entry(id).map(|e| e.token.as_str())
    }

    pub fn corpus_count(&self, id: u32) -> Option<u64> {
        self.entry(id).map(|e| e.corpus_count)
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&(e.token.len() as u32).to_le_bytes())?;
            w.write_all(e.token.as_bytes())?;
            w.write_all(&e.corpus_count.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let corrupt = |why: &str| IndexError::CorruptIndex(format!("vocabulary: {why}"));
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(corrupt("truncated"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut entries: Vec<VocabEntry> = Vec::new();
        for _ in 0..count {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let token = std::str::from_utf8(take(len)?).map_err(|_| corrupt("token is not UTF-8"))?.to_string();
            let corpus_count = u64::from_le_bytes(take(8)?.try_into().unwrap());
            if let Some(prev) = entries.last() {
                if prev.token >= token {
                    return Err(corrupt("tokens out of order"));
                }
            }
            entries.push(VocabEntry { token, corpus_count });
        }
        if !cur.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self::from_sorted(entries))
    }
}

/// Accumulates corpus counts record by record.
#[derive(Debug, Default)]
pub struct VocabularyBuilder {
    counts: HashMap<String, u64>,
}

impl VocabularyBuilder {
    pub fn add(&mut self, record: &SidecarRecord) {
        for (token, count) in &record.tokens {
            let c = self.counts.entry(token.clone()).or_default();
            *c = c.saturating_add(u64::from(*count));
        }
    }

    /// Keeps tokens with `corpus_count ≥ min_count`; ids follow
    /// lexicographic token order.
    pub fn finish(self, min_count: u64) -> Vocabulary {
        let mut entries: Vec<_> = self
            .counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(token, corpus_count)| VocabEntry { token, corpus_count })
            .collect();
        entries.sort_unstable_by(|a, b| a.token.cmp(&b.token));
        Vocabulary::from_sorted(entries)
    }
}

pub fn build_vocabulary<'a>(records: impl IntoIterator<Item = &'a SidecarRecord>, min_count: u64) -> Vocabulary {
    let mut builder = VocabularyBuilder::default();
    records.into_iter().for_each(|r| builder.add(r));
    builder.finish(min_count)
}
