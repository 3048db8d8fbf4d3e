use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use memmap2::Mmap;

use crate::embed::{JlMatrix, Projector, REDUCED_DIM};

use super::format::{self, IndexHeader, OFFSET_RECORD_LEN};
use super::{parse_line, DocLocator, IndexError, Result, Vocabulary};

/// Read-only int8 row block, memory-mapped when non-empty.
#[derive(Debug)]
enum Rows {
    Mapped(Mmap),
    Empty,
}

impl Rows {
    fn open(path: &Path, expected_rows: u64, what: &str) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let expected = expected_rows * REDUCED_DIM as u64;
        if len != expected {
            return Err(IndexError::CorruptIndex(format!("{what} is {len} bytes, expected {expected}")));
        }
        if len == 0 {
            return Ok(Rows::Empty);
        }
        // SAFETY: index files are written once and treated as immutable;
        // concurrent modification of an open index is unsupported.
        let map = unsafe { Mmap::map(&file)? };
        Ok(Rows::Mapped(map))
    }

    fn bytes(&self) -> &[i8] {
        match self {
            Rows::Mapped(m) => bytemuck::cast_slice(&m[..]),
            Rows::Empty => &[],
        }
    }
}

/// An opened, validated index directory. Immutable; share freely.
#[derive(Debug)]
pub struct IndexBundle {
    dir: PathBuf,
    header: IndexHeader,
    locators: Vec<DocLocator>,
    row_by_doc: HashMap<u64, usize>,
    doc_vectors: Rows,
    token_vectors: Rows,
    vocab: Vocabulary,
    projector: Projector,
}

pub fn open_index(dir: &Path) -> Result<IndexBundle> {
    IndexBundle::open(dir)
}

impl IndexBundle {
    pub fn open(dir: &Path) -> Result<Self> {
        let missing = |name: &str, e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::NotFound {
                IndexError::CorruptIndex(format!("missing {name}"))
            } else {
                IndexError::Io(e)
            }
        };
        let read = |name: &str| fs::read(dir.join(name)).map_err(|e| missing(name, e));

        let header = IndexHeader::from_bytes(&read(format::HEADER_FILE)?)?;
        if (header.dim as usize) < REDUCED_DIM {
            return Err(IndexError::CorruptIndex(format!("base dimension {} below {REDUCED_DIM}", header.dim)));
        }

        let offsets = read(format::OFFSETS_FILE)?;
        let expected = header.n_docs * OFFSET_RECORD_LEN as u64;
        if offsets.len() as u64 != expected {
            return Err(IndexError::CorruptIndex(format!(
                "offsets file is {} bytes, expected {expected}",
                offsets.len()
            )));
        }
        let locators = format::read_locators(&offsets)?;
        let mut row_by_doc = HashMap::with_capacity(locators.len());
        for (row, loc) in locators.iter().enumerate() {
            if row_by_doc.insert(loc.doc_id, row).is_some() {
                return Err(IndexError::CorruptIndex(format!("doc id {} appears twice", loc.doc_id)));
            }
        }

        let doc_vectors = Rows::open(&dir.join(format::DOC_VECTORS_FILE), header.n_docs, "doc vectors file")
            .map_err(|e| reclassify(format::DOC_VECTORS_FILE, e))?;
        let token_vectors = Rows::open(&dir.join(format::TOKEN_VECTORS_FILE), header.n_tokens, "token vectors file")
            .map_err(|e| reclassify(format::TOKEN_VECTORS_FILE, e))?;

        let vocab = Vocabulary::read(&read(format::VOCAB_FILE)?[..])?;
        if vocab.len() as u64 != header.n_tokens {
            return Err(IndexError::CorruptIndex(format!(
                "vocabulary has {} entries, header says {}",
                vocab.len(),
                header.n_tokens
            )));
        }
        let projector = format::read_projector(&read(format::PROJECTOR_FILE)?[..])?;
        if projector.base_dim() != header.dim as usize {
            return Err(IndexError::CorruptIndex("projector dimension differs from header".into()));
        }

        Ok(Self { dir: dir.to_path_buf(), header, locators, row_by_doc, doc_vectors, token_vectors, vocab, projector })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self) -> &IndexHeader {
        &self.header
    }

    pub fn jl_seed(&self) -> u64 {
        self.header.jl_seed
    }

    pub fn base_dim(&self) -> usize {
        self.header.dim as usize
    }

    pub fn n_docs(&self) -> usize {
        self.locators.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// Regenerates the sign matrix recorded in the header.
    pub fn jl_matrix(&self) -> JlMatrix {
        JlMatrix::new(self.header.jl_seed, self.base_dim()).expect("header dimension validated on open")
    }

    pub fn locator(&self, row: usize) -> &DocLocator {
        &self.locators[row]
    }

    pub fn row_of_doc(&self, doc_id: u64) -> Option<usize> {
        self.row_by_doc.get(&doc_id).copied()
    }

    pub fn doc_vector(&self, row: usize) -> &[i8] {
        &self.doc_vectors.bytes()[row * REDUCED_DIM..(row + 1) * REDUCED_DIM]
    }

    pub fn token_vector(&self, token_id: u32) -> &[i8] {
        let i = token_id as usize;
        &self.token_vectors.bytes()[i * REDUCED_DIM..(i + 1) * REDUCED_DIM]
    }
}

fn reclassify(name: &str, e: IndexError) -> IndexError {
    match e {
        IndexError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            IndexError::CorruptIndex(format!("missing {name}"))
        }
        other => other,
    }
}

/// Re-reads single records from the sidecar an index was built from.
pub struct SidecarFetcher<'a> {
    bundle: &'a IndexBundle,
    file: File,
    file_len: u64,
    buf: Vec<u8>,
}

impl<'a> SidecarFetcher<'a> {
    pub fn new(bundle: &'a IndexBundle, sidecar: &Path) -> Result<Self> {
        let file = File::open(sidecar)?;
        let file_len = file.metadata()?.len();
        Ok(Self { bundle, file, file_len, buf: Vec::new() })
    }

    /// Surviving `(token_id, count)` pairs of `doc_id`, in record order.
    pub fn fetch(&mut self, doc_id: u64) -> Result<Vec<(u32, u32)>> {
        let row = self.bundle.row_of_doc(doc_id).ok_or(IndexError::UnknownDocId(doc_id))?;
        let loc = *self.bundle.locator(row);
        let end = loc.sidecar_offset.checked_add(loc.sidecar_length);
        if end.map_or(true, |e| e > self.file_len) {
            return Err(IndexError::CorruptIndex(format!("locator of doc {doc_id} points past the sidecar end")));
        }
        self.file.seek(SeekFrom::Start(loc.sidecar_offset))?;
        self.buf.resize(loc.sidecar_length as usize, 0);
        self.file.read_exact(&mut self.buf)?;
        let record = parse_line(&self.buf, row as u64 + 1)?;
        if record.doc_id != doc_id {
            return Err(IndexError::CorruptIndex(format!(
                "sidecar record at offset {} is doc {}, expected {doc_id}",
                loc.sidecar_offset, record.doc_id
            )));
        }
        let vocab = self.bundle.vocabulary();
        Ok(record.tokens.iter().filter_map(|(t, c)| vocab.id_of(t).map(|id| (id, *c))).collect())
    }
}

pub fn fetch_doc_tokens(bundle: &IndexBundle, sidecar: &Path, doc_id: u64) -> Result<Vec<(u32, u32)>> {
    SidecarFetcher::new(bundle, sidecar)?.fetch(doc_id)
}
