use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::embed::{EmbeddingTable, JlMatrix, QuantizedVector};
use crate::expansion::{
    expand, filter_by_vocabulary, merge_synonyms, normalize_phrase, query_vector, ExpansionRequest, ExpansionWarning,
    Expander, Phrase, PhraseSet, PhraseSource,
};
use crate::geometry::{corpus_isotropy, evaluate_with_isotropy, mean_of, EvalOptions, MetricsReport};
use crate::index::IndexBundle;
use crate::search::{knn_parallel, rerank_with_sidecar};

use super::{io_context, load_table, open_configured_index, required, CliError, Config, QueryForm, Result};

/// Everything needed to turn query text into a query vector.
struct QueryContext {
    bundle: IndexBundle,
    table: EmbeddingTable,
    jl: JlMatrix,
    expander: Box<dyn Expander>,
}

/// A query vector and how it was reached.
struct PreparedQuery {
    phrases: PhraseSet,
    token_ids: Vec<u32>,
    dropped: Vec<String>,
    vector: QuantizedVector,
}

impl QueryContext {
    fn open(cfg: &Config) -> Result<Self> {
        let bundle = open_configured_index(cfg)?;
        let table = load_table(cfg)?;
        if table.dim() != bundle.base_dim() {
            return Err(CliError::Config(format!(
                "embedding table has dimension {}, index was built with {}",
                table.dim(),
                bundle.base_dim()
            )));
        }
        let jl = bundle.jl_matrix();
        Ok(Self { bundle, table, jl, expander: super::make_expander(cfg)? })
    }

    fn phrases(&self, cfg: &Config, text: &str, form: QueryForm) -> Result<(PhraseSet, u64)> {
        let e = &cfg.expansion;
        match form {
            QueryForm::Expanded => {
                let req = ExpansionRequest {
                    query_text: text.to_string(),
                    min_phrases: e.min_phrases,
                    max_phrases: e.max_phrases,
                    max_words: e.max_words,
                    min_corpus_count: e.min_corpus_count,
                };
                let mut ps = expand(&req, self.expander.as_ref())?;
                if e.merge {
                    ps = merge_synonyms(&ps, &self.table, self.bundle.projector(), &self.jl, e.tau)?;
                }
                Ok((ps, e.min_corpus_count))
            }
            QueryForm::Raw => {
                let normalized = normalize_phrase(text);
                if normalized.is_empty() {
                    return Err(crate::expansion::ExpansionError::EmptyQuery.into());
                }
                let mut phrases: Vec<Phrase> = Vec::new();
                for w in normalized.split(' ') {
                    if !phrases.iter().any(|p| p.text == w) {
                        phrases.push(Phrase { text: w.to_string(), source: PhraseSource::Model });
                    }
                }
                Ok((PhraseSet { phrases, provenance: "raw".into(), warnings: Vec::new() }, e.raw_min_corpus_count))
            }
        }
    }

    fn prepare(&self, cfg: &Config, text: &str, form: QueryForm) -> Result<PreparedQuery> {
        let (phrases, threshold) = self.phrases(cfg, text, form)?;
        let filtered = filter_by_vocabulary(&phrases, self.bundle.vocabulary(), threshold)?;
        let vector =
            query_vector(&filtered.token_ids, self.bundle.vocabulary(), &self.table, self.bundle.projector(), &self.jl)?;
        Ok(PreparedQuery { phrases, token_ids: filtered.token_ids, dropped: filtered.dropped, vector })
    }
}

fn report_warnings(q: &PreparedQuery, err: &mut dyn Write) -> Result<()> {
    for w in &q.phrases.warnings {
        match w {
            ExpansionWarning::UnderExpanded { got, wanted } => {
                writeln!(err, "warning: expansion produced {got} phrases, fewer than {wanted}")?
            }
        }
    }
    if !q.dropped.is_empty() {
        writeln!(err, "note: dropped phrases: {}", q.dropped.join(", "))?;
    }
    Ok(())
}

pub(super) fn cmd_search(
    cfg: &Config,
    text: &str,
    rerank: bool,
    form: QueryForm,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let sidecar = if rerank { Some(required(&cfg.paths.sidecar, "sidecar (needed by --rerank)")?) } else { None };
    let ctx = QueryContext::open(cfg)?;
    let q = ctx.prepare(cfg, text, form)?;
    report_warnings(&q, err)?;
    let hits = knn_parallel(&ctx.bundle, &q.vector, cfg.search.k, cfg.search.workers)?;
    match sidecar {
        None => {
            for h in &hits {
                writeln!(out, "{}\t{}\t{:.6}", h.rank, h.doc_id, h.score)?;
            }
        }
        Some(sidecar) if !hits.is_empty() => {
            for h in rerank_with_sidecar(&hits, &q.token_ids, &ctx.bundle, sidecar)? {
                writeln!(out, "{}\t{}\t{:.6}\t{:.6}", h.rank, h.doc_id, h.base_score, h.rerank_score)?;
            }
        }
        Some(_) => {}
    }
    Ok(())
}

#[derive(Serialize)]
struct ExpandOutput<'a> {
    query: &'a str,
    phrases: &'a PhraseSet,
    tokens: Vec<&'a str>,
    dropped: &'a [String],
}

pub(super) fn cmd_expand(cfg: &Config, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ctx = QueryContext::open(cfg)?;
    let q = ctx.prepare(cfg, text, QueryForm::Expanded)?;
    report_warnings(&q, err)?;
    let vocab = ctx.bundle.vocabulary();
    let tokens = q.token_ids.iter().map(|&id| vocab.token(id).expect("filtered ids are in the vocabulary")).collect();
    let doc = ExpandOutput { query: text, phrases: &q.phrases, tokens, dropped: &q.dropped };
    writeln!(out, "{}", serde_json::to_string(&doc).expect("expansion output serializes"))?;
    Ok(())
}

/// Form names whose text goes through the expander; all others are raw.
const EXPANDED_FORMS: [&str; 2] = ["expanded", "llm"];

/// Queries in file order, each with its forms in file order.
fn read_queries(path: &Path) -> Result<Vec<(String, Vec<(String, String)>)>> {
    let text = fs::read_to_string(path).map_err(io_context(path.display().to_string()))?;
    let mut queries: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(form), Some(body)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CliError::Usage(format!("{}:{}: expected <query-id>\\t<form>\\t<text>", path.display(), i + 1)));
        };
        match queries.iter_mut().find(|(q, _)| q == id) {
            Some((_, forms)) => {
                if forms.iter().any(|(f, _)| f == form) {
                    return Err(CliError::Usage(format!("{}:{}: form {form:?} repeated for query {id:?}", path.display(), i + 1)));
                }
                forms.push((form.to_string(), body.to_string()));
            }
            None => queries.push((id.to_string(), vec![(form.to_string(), body.to_string())])),
        }
    }
    if queries.is_empty() {
        return Err(CliError::Usage(format!("{} holds no queries", path.display())));
    }
    Ok(queries)
}

#[derive(Serialize)]
struct QueryLine<'a> {
    query_id: &'a str,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

#[derive(Serialize)]
struct Aggregate {
    queries: usize,
    head_cosine: Option<f64>,
    compactness: Option<f64>,
    centroid_closure: Option<f64>,
    isotropy_score: Option<f64>,
    jaccard: Option<f64>,
    random_baseline: f64,
    k: usize,
    #[serde(rename = "N")]
    n: u64,
    d: usize,
}

pub(super) fn cmd_eval(cfg: &Config, path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let queries = read_queries(path)?;
    let ctx = QueryContext::open(cfg)?;
    let opts = EvalOptions {
        k: cfg.eval.k,
        workers: cfg.search.workers,
        isotropy_sample: cfg.eval.isotropy_sample,
        isotropy_seed: cfg.eval.isotropy_seed,
    };
    let isotropy = corpus_isotropy(&ctx.bundle, &opts);
    let mut reports = Vec::new();
    for (id, forms) in &queries {
        let mut vectors = BTreeMap::new();
        for (form, text) in forms {
            let kind = if EXPANDED_FORMS.contains(&form.as_str()) { QueryForm::Expanded } else { QueryForm::Raw };
            match ctx.prepare(cfg, text, kind) {
                Ok(q) => {
                    vectors.insert(form.clone(), q.vector);
                }
                Err(e) => writeln!(err, "warning: query {id} form {form}: {e}")?,
            }
        }
        if vectors.is_empty() {
            writeln!(err, "warning: query {id} skipped, no form could be embedded")?;
            continue;
        }
        let report = evaluate_with_isotropy(&vectors, &ctx.bundle, &opts, isotropy)?;
        writeln!(out, "{}", serde_json::to_string(&QueryLine { query_id: id, report: &report }).expect("report serializes"))?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(CliError::Usage("no query could be evaluated".into()));
    }
    let mean = |f: fn(&MetricsReport) -> Option<f64>| mean_of(reports.iter().filter_map(f));
    let aggregate = Aggregate {
        queries: reports.len(),
        head_cosine: mean(|r| r.head_cosine),
        compactness: mean(|r| r.compactness),
        centroid_closure: mean(|r| r.centroid_closure),
        isotropy_score: isotropy,
        jaccard: mean_of(reports.iter().flat_map(|r| r.jaccard.values().copied())),
        random_baseline: reports[0].random_baseline,
        k: opts.k,
        n: reports[0].n,
        d: reports[0].d,
    };
    writeln!(out, "{}", serde_json::json!({ "aggregate": aggregate }))?;
    Ok(())
}
