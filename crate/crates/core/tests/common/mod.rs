//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use isoretrieval::embed::{EmbeddingTable, Projector};
use isoretrieval::index::{build_index_with_vocabulary, corpus_mean, scan_vocabulary, BuildOptions, BuildReport, IndexBundle};
use isoretrieval::synth::{write_fixture_corpus, FixtureCorpus};

pub const FIXTURE_DIM: usize = 300;

pub fn fixture(dir: &Path, n_docs: usize) -> FixtureCorpus {
    write_fixture_corpus(dir, n_docs, FIXTURE_DIM, 0).expect("fixture corpus writes")
}

/// Builds the fixture's index into `out` with the projector derived from
/// the corpus mean.
pub fn build(corpus: &FixtureCorpus, out: &Path, opts: &BuildOptions) -> (IndexBundle, BuildReport, EmbeddingTable) {
    let table = EmbeddingTable::load(&corpus.table).unwrap();
    let vocab = scan_vocabulary(&corpus.sidecar, opts.min_count).unwrap();
    let mean = corpus_mean(&vocab, &table).unwrap();
    let projector = Projector::build(&[], &mean).unwrap();
    let (bundle, report) = build_index_with_vocabulary(&corpus.sidecar, &vocab, &table, &projector, opts, out).unwrap();
    (bundle, report, table)
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn cli<S: AsRef<str>>(args: &[S]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<String> =
        std::iter::once("isoretrieval".to_string()).chain(args.iter().map(|a| a.as_ref().to_string())).collect();
    let code = isoretrieval::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Writes a fixture corpus plus config in `dir` via the CLI and builds it.
pub fn cli_fixture(dir: &Path) -> PathBuf {
    let (code, _, err) = cli(&["synth", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let config = dir.join("isoretrieval.toml");
    let (code, _, err) = cli(&["--config", config.to_str().unwrap(), "build"]);
    assert_eq!(code, 0, "{err}");
    config
}
