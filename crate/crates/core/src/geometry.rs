//! Geometric judgement of a retrieval result: head cosine, compactness,
//! centroid closure, corpus isotropy, cross-form Jaccard overlap and the
//! random-vector baseline `√(2 ln N / d)`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::embed::{cosine_i8, dequantize_row, dot_i8, QuantizedVector, REDUCED_DIM, ZERO_NORM};
use crate::search::{knn_parallel, DocVectors, SearchError, SearchHit};

pub const DEFAULT_EVAL_K: usize = 20;
pub const DEFAULT_ISOTROPY_SAMPLE: usize = 200;
pub const DEFAULT_ISOTROPY_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("no hits")]
    EmptyHits,

    #[error("need at least two hits")]
    TooFewHits,

    #[error("centroid of the hits has zero norm")]
    ZeroCentroid,

    #[error("isotropy needs {needed} nonzero rows, found {available}")]
    InsufficientRows { needed: usize, available: usize },

    #[error("both sets are empty")]
    BothEmpty,

    #[error("no query forms given")]
    NoForms,

    #[error("hit doc id {0} is not in the index")]
    UnknownDocId(u64),

    #[error("hit doc id {0} has an all-zero vector")]
    ZeroRow(u64),

    #[error(transparent)]
    Search(#[from] SearchError),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// Mean query–document cosine over the hits.
pub fn head_cosine(hits: &[SearchHit]) -> Result<f64> {
    if hits.is_empty() {
        return Err(GeometryError::EmptyHits);
    }
    Ok(hits.iter().map(|h| h.score).sum::<f64>() / hits.len() as f64)
}

fn rows<'a>(store: &'a impl DocVectors, hits: &[SearchHit]) -> Result<Vec<&'a [i8]>> {
    hits.iter()
        .map(|h| {
            let row = store.row_of(h.doc_id).ok_or(GeometryError::UnknownDocId(h.doc_id))?;
            let v = store.vector(row);
            if dot_i8(v, v) == 0 {
                return Err(GeometryError::ZeroRow(h.doc_id));
            }
            Ok(v)
        })
        .collect()
}

/// Mean int8 cosine over all unordered pairs of hits.
pub fn compactness(store: &impl DocVectors, hits: &[SearchHit]) -> Result<f64> {
    if hits.len() < 2 {
        return Err(GeometryError::TooFewHits);
    }
    let vs = rows(store, hits)?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            sum += cosine_i8(vs[i], vs[j]).expect("rows checked nonzero");
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Float cosine between the query and the normalized mean of the
/// dequantized hit vectors.
pub fn centroid_closure(query: &QuantizedVector, store: &impl DocVectors, hits: &[SearchHit]) -> Result<f64> {
    if hits.is_empty() {
        return Err(GeometryError::EmptyHits);
    }
    let mut c = [0.0f64; REDUCED_DIM];
    for v in rows(store, hits)? {
        c.iter_mut().zip(dequantize_row(v)).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().for_each(|a| *a /= hits.len() as f64);
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < ZERO_NORM {
        return Err(GeometryError::ZeroCentroid);
    }
    let q = query.dequantize();
    Ok((q.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / norm).clamp(-1.0, 1.0))
}

/// Expected maximum cosine between a fixed direction and `n` random unit
/// vectors in `d` dimensions, `√(2 ln n / d)`.
pub fn random_baseline(n: u64, d: usize) -> f64 {
    if n <= 1 || d == 0 {
        return 0.0;
    }
    (2.0 * (n as f64).ln() / d as f64).sqrt()
}

/// `std(pairwise cosines) · √d` over a seeded sample of nonzero rows;
/// 1 for an isotropic corpus.
pub fn isotropy_score(store: &impl DocVectors, sample_size: usize, seed: u64) -> Result<f64> {
    let n = store.len();
    if sample_size < 2 {
        return Err(GeometryError::InsufficientRows { needed: 2, available: sample_size });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = HashSet::new();
    let mut sample = Vec::with_capacity(sample_size);
    while sample.len() < sample_size && tried.len() < n {
        let row = rng.gen_range(0..n);
        if !tried.insert(row) {
            continue;
        }
        let v = store.vector(row);
        if dot_i8(v, v) != 0 {
            sample.push(dequantize_row(v));
        }
    }
    if sample.len() < sample_size {
        return Err(GeometryError::InsufficientRows { needed: sample_size, available: sample.len() });
    }
    let mut cosines = Vec::with_capacity(sample_size * (sample_size - 1) / 2);
    for i in 0..sample.len() {
        for j in i + 1..sample.len() {
            cosines.push(sample[i].iter().zip(&sample[j]).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
    let var = cosines.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / cosines.len() as f64;
    Ok(var.sqrt() * (REDUCED_DIM as f64).sqrt())
}

pub fn jaccard_overlap(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> Result<f64> {
    let union = a.union(b).count();
    if union == 0 {
        return Err(GeometryError::BothEmpty);
    }
    Ok(a.intersection(b).count() as f64 / union as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOptions {
    pub k: usize,
    pub workers: usize,
    pub isotropy_sample: usize,
    pub isotropy_seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { k: DEFAULT_EVAL_K, workers: 1, isotropy_sample: DEFAULT_ISOTROPY_SAMPLE, isotropy_seed: DEFAULT_ISOTROPY_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormMetrics {
    pub head_cosine: Option<f64>,
    /// `None` with fewer than two hits.
    pub compactness: Option<f64>,
    pub centroid_closure: Option<f64>,
    pub hits: Vec<SearchHit>,
}

/// Metrics of one query. Top-level metric fields are means over the forms
/// that produced a value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub head_cosine: Option<f64>,
    pub compactness: Option<f64>,
    pub centroid_closure: Option<f64>,
    /// `None` when the corpus has fewer nonzero rows than two.
    pub isotropy_score: Option<f64>,
    /// Keyed `"a|b"` with `a < b`.
    pub jaccard: BTreeMap<String, f64>,
    pub random_baseline: f64,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u64,
    pub d: usize,
    pub forms: BTreeMap<String, FormMetrics>,
}

/// Isotropy with the sample clipped to the rows available.
pub fn corpus_isotropy(store: &impl DocVectors, opts: &EvalOptions) -> Option<f64> {
    let size = opts.isotropy_sample.min(store.len());
    match isotropy_score(store, size, opts.isotropy_seed) {
        Ok(s) => Some(s),
        Err(GeometryError::InsufficientRows { available, .. }) if available >= 2 => {
            isotropy_score(store, available, opts.isotropy_seed).ok()
        }
        Err(_) => None,
    }
}

pub fn evaluate(
    forms: &BTreeMap<String, QuantizedVector>,
    store: &impl DocVectors,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    evaluate_with_isotropy(forms, store, opts, corpus_isotropy(store, opts))
}

/// [`evaluate`] with a precomputed isotropy score, for batches of queries
/// over the same corpus.
pub fn evaluate_with_isotropy(
    forms: &BTreeMap<String, QuantizedVector>,
    store: &impl DocVectors,
    opts: &EvalOptions,
    isotropy: Option<f64>,
) -> Result<MetricsReport> {
    if forms.is_empty() {
        return Err(GeometryError::NoForms);
    }
    let mut per_form = BTreeMap::new();
    for (name, q) in forms {
        let hits = knn_parallel(store, q, opts.k, opts.workers)?;
        let m = FormMetrics {
            head_cosine: head_cosine(&hits).ok(),
            compactness: optional(compactness(store, &hits))?,
            centroid_closure: optional(centroid_closure(q, store, &hits))?,
            hits,
        };
        per_form.insert(name.clone(), m);
    }
    let names: Vec<&String> = per_form.keys().collect();
    let mut jaccard = BTreeMap::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let ids = |n: &String| per_form[n].hits.iter().map(|h| h.doc_id).collect::<BTreeSet<_>>();
            if let Ok(v) = jaccard_overlap(&ids(names[i]), &ids(names[j])) {
                jaccard.insert(format!("{}|{}", names[i], names[j]), v);
            }
        }
    }
    let mean = |f: fn(&FormMetrics) -> Option<f64>| mean_of(per_form.values().filter_map(f));
    Ok(MetricsReport {
        head_cosine: mean(|m| m.head_cosine),
        compactness: mean(|m| m.compactness),
        centroid_closure: mean(|m| m.centroid_closure),
        isotropy_score: isotropy,
        jaccard,
        random_baseline: random_baseline(store.len() as u64, REDUCED_DIM),
        k: opts.k,
        n: store.len() as u64,
        d: REDUCED_DIM,
        forms: per_form,
    })
}

/// Turns the "not enough data" outcomes into `None`.
fn optional(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(GeometryError::EmptyHits | GeometryError::TooFewHits | GeometryError::ZeroCentroid) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn mean_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
