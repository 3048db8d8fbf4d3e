//! Declarative run configuration.
//!
//! A TOML file with the sections below; every key is optional. Relative
//! paths are resolved against the directory of the config file.
//!
//! ```toml
//! [paths]
//! sidecar = "corpus.sidecar"
//! table = "table.emb"
//! index_dir = "index"
//! fixture_dir = "expansions"
//! prompt_template = "prompt.txt"
//! transcript = "expander.jsonl"
//! nuisance_axes = "axes.emb"
//!
//! [build]
//! jl_seed = 0
//! base_dim = 300
//! min_count = 5
//! workers = 1
//! batch_size = 4096
//!
//! [expansion]
//! mode = "stub"            # stub | remote | replay
//! url = "http://127.0.0.1:8080/expand"
//! timeout_ms = 60000
//! retries = 2
//! min_phrases = 20
//! max_phrases = 60
//! max_words = 4
//! min_corpus_count = 50
//! raw_min_corpus_count = 1
//! merge = true
//! tau = 0.9
//!
//! [search]
//! k = 20
//! workers = 1
//!
//! [eval]
//! k = 20
//! isotropy_sample = 200
//! isotropy_seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::{DEFAULT_BASE_DIM, REDUCED_DIM};
use crate::expansion::{
    DEFAULT_MAX_PHRASES, DEFAULT_MAX_WORDS, DEFAULT_MIN_CORPUS_COUNT, DEFAULT_MIN_PHRASES, DEFAULT_TAU,
};
use crate::geometry::{DEFAULT_EVAL_K, DEFAULT_ISOTROPY_SAMPLE, DEFAULT_ISOTROPY_SEED};
use crate::index::DEFAULT_MIN_COUNT;

use super::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub paths: Paths,
    pub build: BuildSection,
    pub expansion: ExpansionSection,
    pub search: SearchSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub sidecar: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub fixture_dir: Option<PathBuf>,
    pub prompt_template: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    pub nuisance_axes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSection {
    pub jl_seed: u64,
    pub base_dim: usize,
    pub min_count: u64,
    pub workers: usize,
    pub batch_size: usize,
}

impl Default for BuildSection {
    fn default() -> Self {
        Self { jl_seed: 0, base_dim: DEFAULT_BASE_DIM, min_count: DEFAULT_MIN_COUNT, workers: 1, batch_size: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExpanderMode {
    Stub,
    Remote,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    pub mode: ExpanderMode,
    pub url: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub min_phrases: usize,
    pub max_phrases: usize,
    pub max_words: usize,
    pub min_corpus_count: u64,
    /// Threshold for raw query words, which skip the expander.
    pub raw_min_corpus_count: u64,
    pub merge: bool,
    pub tau: f64,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self {
            mode: ExpanderMode::Stub,
            url: None,
            timeout_ms: 60_000,
            retries: 2,
            min_phrases: DEFAULT_MIN_PHRASES,
            max_phrases: DEFAULT_MAX_PHRASES,
            max_words: DEFAULT_MAX_WORDS,
            min_corpus_count: DEFAULT_MIN_CORPUS_COUNT,
            raw_min_corpus_count: 1,
            merge: true,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub k: usize,
    pub workers: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self { k: DEFAULT_EVAL_K, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    pub isotropy_sample: usize,
    pub isotropy_seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { k: DEFAULT_EVAL_K, isotropy_sample: DEFAULT_ISOTROPY_SAMPLE, isotropy_seed: DEFAULT_ISOTROPY_SEED }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.paths.rebase(base);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.build.base_dim < REDUCED_DIM {
            return bad(format!("build.base_dim must be at least {REDUCED_DIM}"));
        }
        if self.build.min_count == 0 {
            return bad("build.min_count must be at least 1".into());
        }
        if self.build.workers == 0 || self.search.workers == 0 {
            return bad("worker counts must be at least 1".into());
        }
        if self.build.batch_size == 0 {
            return bad("build.batch_size must be at least 1".into());
        }
        let e = &self.expansion;
        if e.min_phrases == 0 || e.min_phrases > e.max_phrases || e.max_words == 0 {
            return bad("expansion needs 1 ≤ min_phrases ≤ max_phrases and max_words ≥ 1".into());
        }
        if !(e.tau > 0.0 && e.tau < 1.0) {
            return bad(format!("expansion.tau must lie in (0, 1), got {}", e.tau));
        }
        if e.timeout_ms == 0 {
            return bad("expansion.timeout_ms must be positive".into());
        }
        if self.search.k == 0 || self.eval.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.eval.isotropy_sample < 2 {
            return bad("eval.isotropy_sample must be at least 2".into());
        }
        Ok(())
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.sidecar,
            &mut self.table,
            &mut self.index_dir,
            &mut self.fixture_dir,
            &mut self.prompt_template,
            &mut self.transcript,
            &mut self.nuisance_axes,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
