//! Query expansion: phrases from an [`Expander`], normalized and bounded,
//! then mapped onto the index vocabulary and embedded like a document.

mod remote;
mod stub;

pub use remote::{RemoteConfig, RemoteExpander, ReplayExpander, TranscriptEntry, WireRequest, WireResponse};
pub use stub::StubExpander;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_q, embed_document, EmbedError, EmbeddingTable, JlMatrix, Projector, QuantizedVector};
use crate::index::Vocabulary;

pub const DEFAULT_MIN_PHRASES: usize = 20;
pub const DEFAULT_MAX_PHRASES: usize = 60;
pub const DEFAULT_MAX_WORDS: usize = 4;
pub const DEFAULT_MIN_CORPUS_COUNT: u64 = 50;
pub const DEFAULT_TAU: f64 = 0.9;

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("query text is empty")]
    EmptyQuery,

    #[error("invalid expansion request: {0}")]
    InvalidRequest(String),

    #[error("expander unavailable: {0}")]
    ExpanderUnavailable(String),

    #[error("expansion produced no usable phrases")]
    EmptyExpansion,

    #[error("no phrase survived the vocabulary filter (dropped: {})", .dropped.join(", "))]
    AllPhrasesFiltered { dropped: Vec<String> },

    #[error("merge threshold must lie in (0, 1), got {0}")]
    InvalidTau(f64),

    #[error("token id {0} is outside the vocabulary")]
    UnknownTokenId(u32),

    #[error("no query tokens")]
    NoTokens,

    #[error("fixture error: {0}")]
    Fixture(String),

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ExpansionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRequest {
    pub query_text: String,
    pub min_phrases: usize,
    pub max_phrases: usize,
    pub max_words: usize,
    pub min_corpus_count: u64,
}

impl ExpansionRequest {
    pub fn new(query_text: impl Into<String>) -> Self {
        Self {
            query_text: query_text.into(),
            min_phrases: DEFAULT_MIN_PHRASES,
            max_phrases: DEFAULT_MAX_PHRASES,
            max_words: DEFAULT_MAX_WORDS,
            min_corpus_count: DEFAULT_MIN_CORPUS_COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_text.trim().is_empty() {
            return Err(ExpansionError::EmptyQuery);
        }
        if self.min_phrases == 0 || self.min_phrases > self.max_phrases {
            return Err(ExpansionError::InvalidRequest(format!(
                "need 1 ≤ min_phrases ≤ max_phrases, got {} and {}",
                self.min_phrases, self.max_phrases
            )));
        }
        if self.max_words == 0 {
            return Err(ExpansionError::InvalidRequest("max_words must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhraseSource {
    Model,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub text: String,
    pub source: PhraseSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpansionWarning {
    UnderExpanded { got: usize, wanted: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSet {
    pub phrases: Vec<Phrase>,
    /// Identifier of the expander that produced the phrases.
    pub provenance: String,
    pub warnings: Vec<ExpansionWarning>,
}

impl PhraseSet {
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(|p| p.text.as_str())
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

/// Source of raw phrases for a query.
pub trait Expander {
    /// Stable identifier recorded as [`PhraseSet::provenance`].
    fn id(&self) -> String;

    fn raw_phrases(&self, req: &ExpansionRequest) -> Result<Vec<String>>;
}

/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize_phrase(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

pub fn expand(req: &ExpansionRequest, expander: &dyn Expander) -> Result<PhraseSet> {
    req.validate()?;
    let raw = expander.raw_phrases(req)?;
    let mut seen = HashSet::new();
    let mut phrases = Vec::new();
    for p in raw {
        let text = normalize_phrase(&p);
        let words = text.split(' ').filter(|w| !w.is_empty()).count();
        if words == 0 || words > req.max_words || !seen.insert(text.clone()) {
            continue;
        }
        phrases.push(Phrase { text, source: PhraseSource::Model });
    }
    phrases.truncate(req.max_phrases);
    if phrases.is_empty() {
        return Err(ExpansionError::EmptyExpansion);
    }
    let mut warnings = Vec::new();
    if phrases.len() < req.min_phrases {
        warnings.push(ExpansionWarning::UnderExpanded { got: phrases.len(), wanted: req.min_phrases });
    }
    Ok(PhraseSet { phrases, provenance: expander.id(), warnings })
}

/// Surviving vocabulary tokens of a phrase set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredTokens {
    /// Distinct ids in order of first appearance.
    pub token_ids: Vec<u32>,
    /// Phrases that contributed no token.
    pub dropped: Vec<String>,
}

/// Maps each phrase to vocabulary tokens with corpus count `≥ min_corpus_count`.
///
/// The underscore-joined form of the phrase is tried first; failing that,
/// every word of the phrase that passes on its own is kept.
pub fn filter_by_vocabulary(ps: &PhraseSet, vocab: &Vocabulary, min_corpus_count: u64) -> Result<FilteredTokens> {
    let passing = |token: &str| vocab.id_of(token).filter(|&id| vocab.corpus_count(id) >= Some(min_corpus_count));
    let mut seen = HashSet::new();
    let mut out = FilteredTokens { token_ids: Vec::new(), dropped: Vec::new() };
    for text in ps.texts() {
        let ids: Vec<u32> = match passing(&text.replace(' ', "_")) {
            Some(id) => vec![id],
            None => text.split(' ').filter_map(passing).collect(),
        };
        if ids.is_empty() {
            out.dropped.push(text.to_string());
        }
        out.token_ids.extend(ids.into_iter().filter(|id| seen.insert(*id)));
    }
    if out.token_ids.is_empty() {
        return Err(ExpansionError::AllPhrasesFiltered { dropped: out.dropped });
    }
    Ok(out)
}

/// A phrase as a pseudo-document: the joined token when the table has it,
/// otherwise its words with count 1 each. `None` when nothing embeds.
fn embed_phrase(text: &str, table: &EmbeddingTable, p: &Projector, r: &JlMatrix) -> Result<Option<QuantizedVector>> {
    let joined = text.replace(' ', "_");
    let tokens: Vec<(&str, u32)> = if table.row_of(&joined).is_some() {
        vec![(joined.as_str(), 1)]
    } else {
        text.split(' ').map(|w| (w, 1)).collect()
    };
    match embed_document(&tokens, table, p, r) {
        Ok(q) => Ok(Some(q)),
        Err(EmbedError::UnknownAllTokens | EmbedError::EmptyRepresentation) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Single-linkage grouping of phrases whose embeddings have cosine `≥ tau`.
/// Each group keeps its lexicographically smallest phrase, in the position
/// of that phrase in the input. Phrases that cannot be embedded stay alone.
pub fn merge_synonyms(ps: &PhraseSet, table: &EmbeddingTable, p: &Projector, r: &JlMatrix, tau: f64) -> Result<PhraseSet> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(ExpansionError::InvalidTau(tau));
    }
    let n = ps.phrases.len();
    let vectors: Vec<Option<QuantizedVector>> =
        ps.phrases.iter().map(|ph| embed_phrase(&ph.text, table, p, r)).collect::<Result<_>>()?;

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let linked = ps.phrases[i].text == ps.phrases[j].text
                || match (&vectors[i], &vectors[j]) {
                    (Some(a), Some(b)) => cosine_q(a, b)? >= tau,
                    _ => false,
                };
            if linked {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut keep: Vec<(usize, PhraseSource)> = groups
        .values()
        .map(|members| {
            let rep = *members.iter().min_by(|&&a, &&b| ps.phrases[a].text.cmp(&ps.phrases[b].text)).unwrap();
            let source = if members.len() > 1 { PhraseSource::Merged } else { ps.phrases[rep].source };
            (rep, source)
        })
        .collect();
    keep.sort_unstable_by_key(|&(i, _)| i);
    let phrases = keep.into_iter().map(|(i, source)| Phrase { text: ps.phrases[i].text.clone(), source }).collect();
    Ok(PhraseSet { phrases, provenance: ps.provenance.clone(), warnings: ps.warnings.clone() })
}

/// Embeds the distinct `token_ids` with count 1 each, exactly as a document.
pub fn query_vector(
    token_ids: &[u32],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    p: &Projector,
    r: &JlMatrix,
) -> Result<QuantizedVector> {
    if token_ids.is_empty() {
        return Err(ExpansionError::NoTokens);
    }
    let mut ids = token_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let tokens = ids
        .iter()
        .map(|&id| vocab.token(id).map(|t| (t, 1u32)).ok_or(ExpansionError::UnknownTokenId(id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(embed_document(&tokens, table, p, r)?)
}
