//! Parameter-free dense retrieval over a fixed, mean-free embedding space.
//!
//! The pipeline: expand a query into phrases, embed documents and queries
//! with a fixed linear transform (nuisance-axis removal, cosine-gap
//! weighting, ±1 sign projection to 256 dimensions, int8 quantization),
//! scan every document exactly by cosine, optionally rerank by max-dot over
//! token vectors, and judge the result geometrically.

pub mod embed;
pub mod index;
pub mod search;
pub mod expansion;
pub mod geometry;
pub mod synth;
pub mod cli;
