//! Two-pass index construction from a sidecar file.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::embed::{BaseVector, DocumentEmbedder, EmbedError, EmbeddingTable, JlMatrix, Projector, REDUCED_DIM};

use super::format::{self, IndexHeader, FORMAT_VERSION};
use super::{
    open_index, parse_sidecar, DocLocator, IndexBundle, IndexError, Result, SidecarReader, SidecarRecord, Vocabulary,
    VocabularyBuilder, DEFAULT_MIN_COUNT,
};

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub jl_seed: u64,
    pub min_count: u64,
    /// Embedding threads; output bytes do not depend on it.
    pub workers: usize,
    /// Records embedded per parallel batch.
    pub batch_size: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { jl_seed: 0, min_count: DEFAULT_MIN_COUNT, workers: 1, batch_size: 4096 }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BuildReport {
    pub n_docs: u64,
    pub n_tokens: u64,
    /// Documents stored as all-zero rows because nothing representable was left.
    pub empty_docs: Vec<u64>,
    /// Vocabulary tokens stored as all-zero rows (no base embedding, or
    /// nothing left after nuisance removal).
    pub zero_token_rows: u64,
    pub file_sizes: BTreeMap<String, u64>,
    pub projection_seconds: f64,
    pub total_seconds: f64,
}

impl BuildReport {
    pub fn docs_per_second(&self) -> f64 {
        rate(self.n_docs, self.total_seconds)
    }

    /// Rate of the document-embedding phase alone.
    pub fn projection_docs_per_second(&self) -> f64 {
        rate(self.n_docs, self.projection_seconds)
    }
}

fn rate(n: u64, secs: f64) -> f64 {
    if secs > 0.0 {
        n as f64 / secs
    } else {
        0.0
    }
}

/// Pass 1: corpus counts and survival filter. Also rejects malformed
/// records and duplicate doc ids before anything is written.
pub fn scan_vocabulary(sidecar: &Path, min_count: u64) -> Result<Vocabulary> {
    let mut builder = VocabularyBuilder::default();
    for item in parse_sidecar(File::open(sidecar)?) {
        let (record, _) = item?;
        builder.add(&record);
    }
    Ok(builder.finish(min_count))
}

/// Corpus-count-weighted mean of the base embeddings of surviving tokens.
pub fn corpus_mean(vocab: &Vocabulary, table: &EmbeddingTable) -> Result<BaseVector> {
    let mut acc = vec![0.0f64; table.dim()];
    let mut total = 0.0f64;
    for e in vocab.entries() {
        if let Some(row) = table.row_of(&e.token) {
            let c = e.corpus_count as f64;
            acc.iter_mut().zip(table.row(row)).for_each(|(a, &v)| *a += c * f64::from(v));
            total += c;
        }
    }
    if total == 0.0 {
        return Err(IndexError::EmbeddingTableEmptyIntersection);
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(BaseVector::new(acc)?)
}

pub fn build_index(
    sidecar: &Path,
    table: &EmbeddingTable,
    projector: &Projector,
    opts: &BuildOptions,
    out_dir: &Path,
) -> Result<(IndexBundle, BuildReport)> {
    let vocab = scan_vocabulary(sidecar, opts.min_count)?;
    build_index_with_vocabulary(sidecar, &vocab, table, projector, opts, out_dir)
}

/// Pass 2 with a vocabulary from [`scan_vocabulary`].
pub fn build_index_with_vocabulary(
    sidecar: &Path,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    projector: &Projector,
    opts: &BuildOptions,
    out_dir: &Path,
) -> Result<(IndexBundle, BuildReport)> {
    let started = Instant::now();
    if opts.workers == 0 || opts.batch_size == 0 {
        return Err(IndexError::InvalidOptions("workers and batch_size must be positive".into()));
    }
    let table_rows: Vec<Option<u32>> = vocab.entries().iter().map(|e| table.row_of(&e.token)).collect();
    if table_rows.iter().all(Option::is_none) {
        return Err(IndexError::EmbeddingTableEmptyIntersection);
    }
    let jl = JlMatrix::new(opts.jl_seed, projector.base_dim())?;
    let embedder = DocumentEmbedder::new(table, projector, &jl)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| IndexError::InvalidOptions(e.to_string()))?;

    fs::create_dir_all(out_dir)?;
    let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(out_dir.join(name))?)) };

    let mut report = BuildReport::default();

    let token_rows: Vec<Result<Option<[i8; REDUCED_DIM]>>> = pool.install(|| {
        table_rows
            .par_iter()
            .map(|row| match row {
                None => Ok(None),
                Some(r) => representable(embedder.token_vector(*r).map(|q| *q.components())),
            })
            .collect()
    });
    let mut token_out = create(format::TOKEN_VECTORS_FILE)?;
    for row in token_rows {
        match row? {
            Some(q) => token_out.write_all(bytemuck::cast_slice(&q))?,
            None => {
                report.zero_token_rows += 1;
                token_out.write_all(&[0u8; REDUCED_DIM])?;
            }
        }
    }
    token_out.flush()?;

    let mut offsets_out = create(format::OFFSETS_FILE)?;
    let mut docs_out = create(format::DOC_VECTORS_FILE)?;
    let mut batch: Vec<(SidecarRecord, DocLocator)> = Vec::with_capacity(opts.batch_size);
    let mut projection = std::time::Duration::ZERO;
    let mut records = SidecarReader::new(std::io::BufReader::new(File::open(sidecar)?)).without_duplicate_check();
    loop {
        batch.clear();
        for item in records.by_ref().take(opts.batch_size) {
            batch.push(item?);
        }
        if batch.is_empty() {
            break;
        }
        let t0 = Instant::now();
        let embedded: Vec<Result<Option<[i8; REDUCED_DIM]>>> = pool.install(|| {
            batch
                .par_iter()
                .map(|(record, _)| {
                    let rows: Vec<(u32, u64)> = record
                        .tokens
                        .iter()
                        .filter_map(|(tok, c)| {
                            let id = vocab.id_of(tok)?;
                            table_rows[id as usize].map(|r| (r, u64::from(*c)))
                        })
                        .collect();
                    if rows.is_empty() {
                        return Ok(None);
                    }
                    representable(embedder.embed_rows(&rows).map(|q| *q.components()))
                })
                .collect()
        });
        projection += t0.elapsed();
        for ((record, locator), row) in batch.iter().zip(embedded) {
            format::write_locator(&mut offsets_out, locator)?;
            match row? {
                Some(q) => docs_out.write_all(bytemuck::cast_slice(&q))?,
                None => {
                    report.empty_docs.push(record.doc_id);
                    docs_out.write_all(&[0u8; REDUCED_DIM])?;
                }
            }
            report.n_docs += 1;
        }
    }
    offsets_out.flush()?;
    docs_out.flush()?;

    let mut vocab_out = create(format::VOCAB_FILE)?;
    vocab.write(&mut vocab_out)?;
    vocab_out.flush()?;

    let mut projector_out = create(format::PROJECTOR_FILE)?;
    format::write_projector(&mut projector_out, projector)?;
    projector_out.flush()?;

    report.n_tokens = vocab.len() as u64;
    let header = IndexHeader {
        version: FORMAT_VERSION,
        dim: projector.base_dim() as u32,
        jl_seed: opts.jl_seed,
        n_docs: report.n_docs,
        n_tokens: report.n_tokens,
        min_count: opts.min_count,
    };
    fs::write(out_dir.join(format::HEADER_FILE), header.to_bytes())?;

    for name in format::INDEX_FILES {
        report.file_sizes.insert(name.to_string(), fs::metadata(out_dir.join(name))?.len());
    }
    report.projection_seconds = projection.as_secs_f64();
    report.total_seconds = started.elapsed().as_secs_f64();
    let bundle = open_index(out_dir)?;
    Ok((bundle, report))
}

/// Maps "nothing to represent" outcomes to a zero row; other errors propagate.
fn representable<T>(r: std::result::Result<T, EmbedError>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EmbedError::EmptyRepresentation | EmbedError::UnknownAllTokens | EmbedError::ZeroVector) => Ok(None),
        Err(e) => Err(e.into()),
    }
}
