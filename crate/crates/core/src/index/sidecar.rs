//! Streaming reader for the pre-parsed corpus sidecar.
//!
//! One UTF-8 record per line:
//!
//! ```text
//! <doc_id>\t<token>:<count>( <token>:<count>)*\n
//! ```
//!
//! `doc_id` and `count` are decimal, `count ≥ 1`, and tokens contain no space,
//! tab, colon or newline.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use super::{IndexError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarRecord {
    pub doc_id: u64,
    pub tokens: Vec<(String, u32)>,
}

/// Where a record's line lives in the sidecar, excluding its `\n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocLocator {
    pub doc_id: u64,
    pub sidecar_offset: u64,
    pub sidecar_length: u64,
}

/// Parses one record line (without its trailing newline).
pub fn parse_line(line: &[u8], line_no: u64) -> Result<SidecarRecord> {
    let bad = |reason: &str| IndexError::MalformedRecord { line: line_no, reason: reason.to_string() };
    let line = std::str::from_utf8(line).map_err(|_| bad("not UTF-8"))?;
    let (id, rest) = line.split_once('\t').ok_or_else(|| bad("missing tab after doc id"))?;
    let doc_id = parse_decimal(id).ok_or_else(|| bad("doc id is not a decimal u64"))?;
    let mut tokens = Vec::new();
    for pair in rest.split(' ') {
        let (token, count) = pair.split_once(':').ok_or_else(|| bad("token without ':count'"))?;
        if token.is_empty() {
            return Err(bad("empty token"));
        }
        if token.contains(['\t', '\n']) {
            return Err(bad("token contains a tab"));
        }
        let count = parse_decimal(count)
            .and_then(|c| u32::try_from(c).ok())
            .filter(|&c| c > 0)
            .ok_or_else(|| bad("count must be a positive decimal"))?;
        tokens.push((token.to_string(), count));
    }
    Ok(SidecarRecord { doc_id, tokens })
}

fn parse_decimal(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Iterator over `(record, locator)` pairs in file order.
///
/// Holds one line at a time plus the set of doc ids seen so far.
pub struct SidecarReader<R> {
    reader: R,
    offset: u64,
    line_no: u64,
    seen: HashSet<u64>,
    buf: Vec<u8>,
    failed: bool,
    check_duplicates: bool,
}

impl<R: BufRead> SidecarReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            offset: 0,
            line_no: 0,
            seen: HashSet::new(),
            buf: Vec::new(),
            failed: false,
            check_duplicates: true,
        }
    }

    /// Skips duplicate-id tracking, for re-reading a file already validated.
    pub fn without_duplicate_check(mut self) -> Self {
        self.check_duplicates = false;
        self
    }

    fn next_record(&mut self) -> Result<Option<(SidecarRecord, DocLocator)>> {
        self.buf.clear();
        let read = self.reader.read_until(b'\n', &mut self.buf)?;
        if read == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        let start = self.offset;
        self.offset += read as u64;
        let line = self.buf.strip_suffix(b"\n").unwrap_or(&self.buf);
        let record = parse_line(line, self.line_no)?;
        if self.check_duplicates && !self.seen.insert(record.doc_id) {
            return Err(IndexError::DuplicateDocId(record.doc_id));
        }
        let locator = DocLocator {
            doc_id: record.doc_id,
            sidecar_offset: start,
            sidecar_length: line.len() as u64,
        };
        Ok(Some((record, locator)))
    }
}

impl<R: BufRead> Iterator for SidecarReader<R> {
    type Item = Result<(SidecarRecord, DocLocator)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.next_record().transpose();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

pub fn parse_sidecar<R: Read>(stream: R) -> SidecarReader<BufReader<R>> {
    SidecarReader::new(BufReader::new(stream))
}
