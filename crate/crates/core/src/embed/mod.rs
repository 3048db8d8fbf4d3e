//! Fixed linear embedding transform.
//!
//! A token's base embedding `f(t)` is projected onto the complement of the
//! nuisance axes (the corpus mean among them), weighted by its cosine gap to
//! the reference mean direction, averaged with its within-document count,
//! mapped to 256 dimensions by a fixed ±1 sign matrix and quantized to int8.
//!
//! Nothing in this module is learned. Every operation is a pure function of
//! its inputs, and [`Projector`], [`JlMatrix`] and [`EmbeddingTable`] are
//! immutable once built, so they can be shared freely across threads.

mod document;
mod jl;
mod projector;
mod quant;
mod table;
mod vector;

pub use document::{embed_document, weighted_mean, DocumentEmbedder, WeightedToken};
pub use jl::{jl_project, JlMatrix};
pub use projector::{token_weight, Projector};
pub use quant::{cosine_from_parts, cosine_i8, cosine_q, dequantize_row, dot_i8, quantize, QuantizedVector};
pub use table::EmbeddingTable;
pub use vector::{BaseVector, ReducedVector};

use thiserror::Error;

/// Output dimension of the sign projection and of every stored vector.
pub const REDUCED_DIM: usize = 256;

/// Default base dimension of token embeddings.
pub const DEFAULT_BASE_DIM: usize = 300;

/// Largest magnitude of a quantized component. `-128` is never produced.
pub const QUANT_MAX: i8 = 127;

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// Gram–Schmidt residuals below this norm are dropped from the nuisance basis.
pub const BASIS_RESIDUAL: f64 = 1e-9;

/// Allowed deviation of a reduced vector's norm from 1 before quantization.
pub const NORM_SLACK: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("corpus mean has (near) zero norm")]
    DegenerateMean,

    #[error("nuisance axes span the whole base space (d = {0})")]
    NuisanceSpansSpace(usize),

    #[error("invalid projector: {0}")]
    InvalidProjector(&'static str),

    #[error("vector contains non-finite components")]
    NonFinite,

    #[error("weighted token mass is zero; nothing left to represent")]
    EmptyRepresentation,

    #[error("no token of the document is present in the embedding table")]
    UnknownAllTokens,

    #[error("invalid base dimension {0}: must be at least {REDUCED_DIM}")]
    InvalidDimension(usize),

    #[error("zero vector")]
    ZeroVector,

    #[error("vector is not unit norm (norm = {0})")]
    NotNormalized(f64),

    #[error("invalid quantized vector: {0}")]
    InvalidQuantized(&'static str),

    #[error("invalid token count 0")]
    ZeroCount,

    #[error("embedding table: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;
