//! Exact cosine kNN over int8 rows and the max-dot reranker.
//!
//! Every hit list is ordered by score descending with ties broken by
//! ascending doc id, so results are reproducible across runs, worker counts
//! and implementations.

mod knn;
mod rerank;

pub use knn::{knn, knn_parallel, SearchHit};
pub use rerank::{rerank_max_dot, rerank_with_sidecar, RerankedHit};

use std::collections::HashMap;

use thiserror::Error;

use crate::embed::REDUCED_DIM;
use crate::index::{IndexBundle, IndexError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("query vector is all zero")]
    ZeroQuery,

    #[error("k must be at least 1")]
    InvalidK,

    #[error("worker count must be at least 1")]
    InvalidWorkerCount,

    #[error("query token id {0} is outside the vocabulary")]
    UnknownTokenId(u32),

    #[error("no query tokens given for reranking")]
    EmptyQuery,

    #[error("no query token has a usable token vector")]
    NoUsableQueryTokens,

    #[error(transparent)]
    Index(#[from] IndexError),
}

pub type Result<T, E = SearchError> = std::result::Result<T, E>;

/// Row-addressable block of 256-wide int8 document vectors.
pub trait DocVectors: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn vector(&self, row: usize) -> &[i8];

    fn doc_id(&self, row: usize) -> u64;

    fn row_of(&self, doc_id: u64) -> Option<usize>;
}

/// Id-addressable int8 token vectors.
pub trait TokenVectors {
    fn token_count(&self) -> usize;

    fn token_vector(&self, token_id: u32) -> &[i8];
}

impl DocVectors for IndexBundle {
    fn len(&self) -> usize {
        self.n_docs()
    }

    fn vector(&self, row: usize) -> &[i8] {
        self.doc_vector(row)
    }

    fn doc_id(&self, row: usize) -> u64 {
        self.locator(row).doc_id
    }

    fn row_of(&self, doc_id: u64) -> Option<usize> {
        self.row_of_doc(doc_id)
    }
}

impl TokenVectors for IndexBundle {
    fn token_count(&self) -> usize {
        self.n_tokens()
    }

    fn token_vector(&self, token_id: u32) -> &[i8] {
        IndexBundle::token_vector(self, token_id)
    }
}

/// Owned row block, handy for vectors that never touched disk.
#[derive(Debug, Clone, Default)]
pub struct InMemoryVectors {
    ids: Vec<u64>,
    data: Vec<i8>,
    rows: HashMap<u64, usize>,
}

impl InMemoryVectors {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row. Ids must be unique; a repeated id panics.
    pub fn push(&mut self, id: u64, vector: &[i8]) {
        assert_eq!(vector.len(), REDUCED_DIM, "rows are {REDUCED_DIM} wide");
        assert!(self.rows.insert(id, self.ids.len()).is_none(), "duplicate id {id}");
        self.ids.push(id);
        self.data.extend_from_slice(vector);
    }
}

impl DocVectors for InMemoryVectors {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn vector(&self, row: usize) -> &[i8] {
        &self.data[row * REDUCED_DIM..(row + 1) * REDUCED_DIM]
    }

    fn doc_id(&self, row: usize) -> u64 {
        self.ids[row]
    }

    fn row_of(&self, doc_id: u64) -> Option<usize> {
        self.rows.get(&doc_id).copied()
    }
}

/// Token vectors indexed by position: token id `i` is the `i`-th pushed row.
impl TokenVectors for InMemoryVectors {
    fn token_count(&self) -> usize {
        self.ids.len()
    }

    fn token_vector(&self, token_id: u32) -> &[i8] {
        self.vector(token_id as usize)
    }
}
