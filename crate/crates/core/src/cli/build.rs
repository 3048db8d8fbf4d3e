use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::{BaseVector, EmbeddingTable, Projector};
use crate::index::{build_index_with_vocabulary, corpus_mean, format::INDEX_FILES, scan_vocabulary, BuildOptions, BuildReport};
use crate::synth::write_fixture_corpus;

use super::{io_context, load_table, required, CliError, Config, Result};

pub const BUILD_REPORT_FILE: &str = "build_report.json";

#[derive(Debug, Serialize, Deserialize)]
struct StoredReport {
    n_docs: u64,
    n_tokens: u64,
    empty_docs: Vec<u64>,
    zero_token_rows: u64,
    file_sizes: BTreeMap<String, u64>,
    sha256: BTreeMap<String, String>,
    total_seconds: f64,
    projection_seconds: f64,
    docs_per_second: f64,
    projection_docs_per_second: f64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_context(path.display().to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn previous_hashes(dir: &Path) -> Option<BTreeMap<String, String>> {
    let text = fs::read_to_string(dir.join(BUILD_REPORT_FILE)).ok()?;
    serde_json::from_str::<StoredReport>(&text).ok().map(|r| r.sha256)
}

fn nuisance_axes(cfg: &Config) -> Result<Vec<BaseVector>> {
    let Some(path) = &cfg.paths.nuisance_axes else { return Ok(Vec::new()) };
    let axes = EmbeddingTable::load(path)?;
    (0..axes.len() as u32).map(|r| Ok(axes.base_vector(r))).collect()
}

pub(super) fn cmd_build(cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let sidecar = required(&cfg.paths.sidecar, "sidecar")?;
    let index_dir = required(&cfg.paths.index_dir, "index directory")?;
    if !sidecar.is_file() {
        return Err(CliError::Io {
            context: sidecar.display().to_string(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        });
    }
    let table = load_table(cfg)?;
    if table.dim() != cfg.build.base_dim {
        return Err(CliError::Config(format!(
            "embedding table has dimension {}, config says base_dim = {}",
            table.dim(),
            cfg.build.base_dim
        )));
    }
    let vocab = scan_vocabulary(sidecar, cfg.build.min_count)?;
    let mean = corpus_mean(&vocab, &table)?;
    let projector = Projector::build(&nuisance_axes(cfg)?, &mean)?;
    let previous = previous_hashes(index_dir);
    let opts = BuildOptions {
        jl_seed: cfg.build.jl_seed,
        min_count: cfg.build.min_count,
        workers: cfg.build.workers,
        batch_size: cfg.build.batch_size,
    };
    let (_, report) = build_index_with_vocabulary(sidecar, &vocab, &table, &projector, &opts, index_dir)?;

    let mut sha256 = BTreeMap::new();
    for name in INDEX_FILES {
        sha256.insert(name.to_string(), sha256_file(&index_dir.join(name))?);
    }
    let stored = stored_report(&report, sha256.clone());
    fs::write(index_dir.join(BUILD_REPORT_FILE), serde_json::to_string_pretty(&stored).expect("report serializes"))
        .map_err(io_context(BUILD_REPORT_FILE))?;

    writeln!(out, "N\t{}", report.n_docs)?;
    writeln!(out, "V\t{}", report.n_tokens)?;
    for (name, size) in &report.file_sizes {
        writeln!(out, "bytes\t{name}\t{size}")?;
    }
    writeln!(out, "empty_docs\t{}", report.empty_docs.len())?;
    writeln!(out, "zero_token_rows\t{}", report.zero_token_rows)?;
    writeln!(out, "wall_seconds\t{:.3}", report.total_seconds)?;
    writeln!(out, "docs_per_second\t{:.0}", report.docs_per_second())?;
    writeln!(out, "projection_docs_per_second\t{:.0}", report.projection_docs_per_second())?;
    let note = match previous {
        Some(prev) if prev == sha256 => "byte-identical to previous build",
        Some(_) => "differs from previous build",
        None => "no previous build",
    };
    writeln!(out, "note\t{note}")?;
    if !report.empty_docs.is_empty() {
        writeln!(err, "warning: {} documents have no representable tokens and are stored as zero rows", report.empty_docs.len())?;
    }
    Ok(())
}

fn stored_report(r: &BuildReport, sha256: BTreeMap<String, String>) -> StoredReport {
    StoredReport {
        n_docs: r.n_docs,
        n_tokens: r.n_tokens,
        empty_docs: r.empty_docs.clone(),
        zero_token_rows: r.zero_token_rows,
        file_sizes: r.file_sizes.clone(),
        sha256,
        total_seconds: r.total_seconds,
        projection_seconds: r.projection_seconds,
        docs_per_second: r.docs_per_second(),
        projection_docs_per_second: r.projection_docs_per_second(),
    }
}

pub(super) fn cmd_synth(dir: &Path, docs: usize, dim: usize, seed: u64, out: &mut dyn Write) -> Result<()> {
    let corpus = write_fixture_corpus(dir, docs, dim, seed).map_err(io_context(dir.display().to_string()))?;
    let config = format!(
        "[paths]\nsidecar = \"corpus.sidecar\"\ntable = \"table.emb\"\nindex_dir = \"index\"\nfixture_dir = \"expansions\"\n\n\
         [build]\nbase_dim = {dim}\n"
    );
    let config_path = dir.join("isoretrieval.toml");
    fs::write(&config_path, config).map_err(io_context(config_path.display().to_string()))?;
    writeln!(out, "sidecar\t{}", corpus.sidecar.display())?;
    writeln!(out, "table\t{}", corpus.table.display())?;
    writeln!(out, "fixtures\t{}", corpus.fixture_dir.display())?;
    writeln!(out, "queries\t{}", corpus.queries.display())?;
    writeln!(out, "config\t{}", config_path.display())?;
    Ok(())
}

pub(super) fn cmd_synth_table(cfg: &Config, path: &Path, dim: usize, seed: u64, out: &mut dyn Write) -> Result<()> {
    let sidecar = required(&cfg.paths.sidecar, "sidecar")?;
    let vocab = scan_vocabulary(sidecar, 1)?;
    let table = EmbeddingTable::from_hashed_tokens(vocab.entries().iter().map(|e| e.token.as_str()), dim, seed)?;
    table.save(path)?;
    writeln!(out, "rows\t{}", table.len())?;
    writeln!(out, "dim\t{dim}")?;
    Ok(())
}
