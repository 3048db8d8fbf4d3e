use std::path::Path;

use serde::Serialize;

use crate::embed::{cosine_from_parts, dot_i8};
use crate::index::{IndexBundle, IndexError, SidecarFetcher};

use super::{Result, SearchError, SearchHit, TokenVectors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RerankedHit {
    pub doc_id: u64,
    pub base_score: f64,
    pub rerank_score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Score given to a document with no usable tokens.
pub const EMPTY_DOC_SCORE: f64 = -1.0;

/// Reorders `hits` by the mean over distinct query tokens of the best
/// cosine against any token of the document.
///
/// `fetch` returns the surviving `(token_id, count)` pairs of a document.
/// Tokens stored as zero rows take no part on either side.
pub fn rerank_max_dot<T, F>(
    hits: &[SearchHit],
    query_token_ids: &[u32],
    tokens: &T,
    mut fetch: F,
) -> Result<Vec<RerankedHit>>
where
    T: TokenVectors + ?Sized,
    F: FnMut(u64) -> std::result::Result<Vec<(u32, u32)>, IndexError>,
{
    if query_token_ids.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let v = tokens.token_count();
    let mut ids = query_token_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= v) {
        return Err(SearchError::UnknownTokenId(bad));
    }
    let query: Vec<(&[i8], i32)> = ids
        .iter()
        .map(|&id| with_norm(tokens.token_vector(id)))
        .filter(|(_, n)| *n != 0)
        .collect();
    if query.is_empty() {
        return Err(SearchError::NoUsableQueryTokens);
    }

    let mut out = Vec::with_capacity(hits.len());
    for hit in hits {
        let doc: Vec<(&[i8], i32)> = fetch(hit.doc_id)?
            .into_iter()
            .filter(|&(id, _)| (id as usize) < v)
            .map(|(id, _)| with_norm(tokens.token_vector(id)))
            .filter(|(_, n)| *n != 0)
            .collect();
        let rerank_score = if doc.is_empty() {
            EMPTY_DOC_SCORE
        } else {
            let total: f64 = query
                .iter()
                .map(|&(q, qn)| {
                    doc.iter().map(|&(t, tn)| cosine_from_parts(dot_i8(q, t), qn, tn)).fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            (total / query.len() as f64).clamp(-1.0, 1.0)
        };
        out.push(RerankedHit { doc_id: hit.doc_id, base_score: hit.score, rerank_score, rank: 0 });
    }
    out.sort_by(|a, b| {
        b.rerank_score
            .total_cmp(&a.rerank_score)
            .then_with(|| b.base_score.total_cmp(&a.base_score))
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    for (i, h) in out.iter_mut().enumerate() {
        h.rank = i + 1;
    }
    Ok(out)
}

fn with_norm(v: &[i8]) -> (&[i8], i32) {
    (v, dot_i8(v, v))
}

/// [`rerank_max_dot`] reading document tokens from the sidecar the index was
/// built from.
pub fn rerank_with_sidecar(
    hits: &[SearchHit],
    query_token_ids: &[u32],
    bundle: &IndexBundle,
    sidecar: &Path,
) -> Result<Vec<RerankedHit>> {
    let mut fetcher = SidecarFetcher::new(bundle, sidecar)?;
    rerank_max_dot(hits, query_token_ids, bundle, |id| fetcher.fetch(id))
}
