//! Flat on-disk index: document offsets, document vectors, vocabulary and
//! token vectors, plus a small header and the projector used at build time.
//!
//! Sizes follow directly from the header: `24·N` bytes of offsets, `256·N`
//! bytes of document vectors and `256·V` bytes of token vectors. They are
//! checked every time an index is opened.

mod build;
mod bundle;
pub mod format;
mod sidecar;
mod vocab;

pub use build::{build_index, build_index_with_vocabulary, corpus_mean, scan_vocabulary, BuildOptions, BuildReport};
pub use bundle::{fetch_doc_tokens, open_index, IndexBundle, SidecarFetcher};
pub use format::IndexHeader;
pub use sidecar::{parse_line, parse_sidecar, DocLocator, SidecarReader, SidecarRecord};
pub use vocab::{build_vocabulary, VocabEntry, Vocabulary, VocabularyBuilder, DEFAULT_MIN_COUNT};

use thiserror::Error;

use crate::embed::EmbedError;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("malformed sidecar record at line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },

    #[error("duplicate doc id {0} in sidecar")]
    DuplicateDocId(u64),

    #[error("unknown doc id {0}")]
    UnknownDocId(u64),

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("no vocabulary token has a base embedding")]
    EmbeddingTableEmptyIntersection,

    #[error("invalid build options: {0}")]
    InvalidOptions(String),

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = IndexError> = std::result::Result<T, E>;
