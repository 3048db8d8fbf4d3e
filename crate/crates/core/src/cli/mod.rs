//! Command-line front end: build, search, expand, eval, inspect.
//!
//! Settings come from an optional TOML file (see [`config`]), then from the
//! environment for the expander URL and timeout, then from flags; later
//! sources win. Machine-readable output goes to standard output only and
//! diagnostics to standard error only.

mod build;
pub mod config;
mod inspect;
mod query;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::embed::{EmbedError, EmbeddingTable};
use crate::expansion::{ExpansionError, Expander, RemoteConfig, RemoteExpander, ReplayExpander, StubExpander};
use crate::geometry::GeometryError;
use crate::index::{open_index, IndexBundle, IndexError};
use crate::search::SearchError;

pub use config::{Config, ExpanderMode};

pub const ENV_EXPANDER_URL: &str = "ISORETRIEVAL_EXPANDER_URL";
pub const ENV_EXPANDER_TIMEOUT_MS: &str = "ISORETRIEVAL_EXPANDER_TIMEOUT_MS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error(transparent)]
    Index(#[from] IndexError),

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error(transparent)]
    Search(#[from] SearchError),

    #[error(transparent)]
    Expansion(#[from] ExpansionError),

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl From<std::io::Error> for CliError {
    fn from(source: std::io::Error) -> Self {
        CliError::Io { context: "i/o".into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "isoretrieval", version, about = "Parameter-free dense retrieval with exact int8 cosine search")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub sidecar: Option<PathBuf>,
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    #[arg(long = "index", global = true)]
    pub index_dir: Option<PathBuf>,
    /// Stub expander fixture directory.
    #[arg(long = "fixtures", global = true)]
    pub fixture_dir: Option<PathBuf>,
    /// EMB1 file whose rows are extra nuisance axes (token names ignored).
    #[arg(long, global = true)]
    pub nuisance_axes: Option<PathBuf>,
    #[arg(long, global = true)]
    pub prompt_template: Option<PathBuf>,
    /// JSON-lines expander transcript (written by remote, read by replay).
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    #[arg(long, global = true)]
    pub jl_seed: Option<u64>,
    #[arg(long, global = true)]
    pub base_dim: Option<usize>,
    #[arg(long, global = true)]
    pub min_count: Option<u64>,
    /// Worker threads for build and scan.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub expander: Option<ExpanderMode>,
    #[arg(long, global = true, env = ENV_EXPANDER_URL)]
    pub expander_url: Option<String>,
    #[arg(long, global = true, env = ENV_EXPANDER_TIMEOUT_MS)]
    pub expander_timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    pub min_corpus_count: Option<u64>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Skip synonym merging of expanded phrases.
    #[arg(long, global = true)]
    pub no_merge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum QueryForm {
    /// Phrases from the expander.
    Expanded,
    /// The query's own words.
    Raw,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a sidecar and an embedding table.
    Build {
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Retrieve the top-k documents for a query.
    Search {
        query: String,
        #[arg(long)]
        k: Option<usize>,
        /// Reorder hits by max-dot over token vectors (needs the sidecar).
        #[arg(long)]
        rerank: bool,
        #[arg(long, value_enum, default_value = "expanded")]
        form: QueryForm,
    },
    /// Print the expanded, filtered phrase set of a query as JSON.
    Expand { query: String },
    /// Geometric metrics for a file of `<query-id>\t<form>\t<text>` lines.
    Eval {
        queries: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Dump the header and one stored row.
    Inspect {
        #[arg(long, conflicts_with = "token", required_unless_present = "token")]
        doc: Option<u64>,
        #[arg(long)]
        token: Option<String>,
    },
    /// Write a deterministic fixture corpus and a config pointing at it.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = crate::embed::DEFAULT_BASE_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a hashed stand-in embedding table for every token of the sidecar.
    SynthTable {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = crate::embed::DEFAULT_BASE_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Overrides {
    fn apply(&self, cfg: &mut Config) {
        let p = &mut cfg.paths;
        for (slot, value) in [
            (&mut p.sidecar, &self.sidecar),
            (&mut p.table, &self.table),
            (&mut p.index_dir, &self.index_dir),
            (&mut p.fixture_dir, &self.fixture_dir),
            (&mut p.nuisance_axes, &self.nuisance_axes),
            (&mut p.prompt_template, &self.prompt_template),
            (&mut p.transcript, &self.transcript),
        ] {
            if let Some(v) = value {
                *slot = Some(v.clone());
            }
        }
        set(&mut cfg.build.jl_seed, self.jl_seed);
        set(&mut cfg.build.base_dim, self.base_dim);
        set(&mut cfg.build.min_count, self.min_count);
        set(&mut cfg.build.workers, self.workers);
        set(&mut cfg.search.workers, self.workers);
        set(&mut cfg.expansion.mode, self.expander);
        set(&mut cfg.expansion.timeout_ms, self.expander_timeout_ms);
        set(&mut cfg.expansion.min_corpus_count, self.min_corpus_count);
        set(&mut cfg.expansion.tau, self.tau);
        if let Some(url) = &self.expander_url {
            cfg.expansion.url = Some(url.clone());
        }
        if self.no_merge {
            cfg.expansion.merge = false;
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Runs one command; returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let to_out = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            let _ = if to_out { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return if to_out { 0 } else { 2 };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    match cli.command {
        Command::Build { batch_size } => {
            set(&mut cfg.build.batch_size, batch_size);
            cfg.validate()?;
            build::cmd_build(&cfg, out, err)
        }
        Command::Search { query, k, rerank, form } => {
            set(&mut cfg.search.k, k);
            cfg.validate()?;
            query::cmd_search(&cfg, &query, rerank, form, out, err)
        }
        Command::Expand { query } => query::cmd_expand(&cfg, &query, out, err),
        Command::Eval { queries, k } => {
            set(&mut cfg.eval.k, k);
            cfg.validate()?;
            query::cmd_eval(&cfg, &queries, out, err)
        }
        Command::Inspect { doc, token } => inspect::cmd_inspect(&cfg, doc, token.as_deref(), out),
        Command::Synth { out_dir, docs, dim, seed } => build::cmd_synth(&out_dir, docs, dim, seed, out),
        Command::SynthTable { out: path, dim, seed } => build::cmd_synth_table(&cfg, &path, dim, seed, out),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| CliError::Usage(format!("no {what} configured (set it in the config file or by flag)")))
}

fn io_context(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn load_table(cfg: &Config) -> Result<EmbeddingTable> {
    let path = required(&cfg.paths.table, "embedding table")?;
    if !path.exists() {
        return Err(CliError::Io {
            context: path.display().to_string(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        });
    }
    Ok(EmbeddingTable::load(path)?)
}

fn open_configured_index(cfg: &Config) -> Result<IndexBundle> {
    Ok(open_index(required(&cfg.paths.index_dir, "index directory")?)?)
}

fn make_expander(cfg: &Config) -> Result<Box<dyn Expander>> {
    let prompt = match &cfg.paths.prompt_template {
        Some(p) => Some(std::fs::read_to_string(p).map_err(io_context(p.display().to_string()))?),
        None => None,
    };
    Ok(match cfg.expansion.mode {
        ExpanderMode::Stub => match &cfg.paths.fixture_dir {
            Some(dir) => Box::new(StubExpander::from_dir(dir)?),
            None => Box::new(StubExpander::new()),
        },
        ExpanderMode::Remote => {
            let url = cfg
                .expansion
                .url
                .clone()
                .ok_or_else(|| CliError::Usage(format!("remote expander needs a URL (config or {ENV_EXPANDER_URL})")))?;
            Box::new(RemoteExpander::new(RemoteConfig {
                url,
                timeout: Duration::from_millis(cfg.expansion.timeout_ms),
                retries: cfg.expansion.retries,
                prompt_template: prompt,
                transcript: cfg.paths.transcript.clone(),
            })?)
        }
        ExpanderMode::Replay => {
            Box::new(ReplayExpander::load(required(&cfg.paths.transcript, "expander transcript")?, prompt)?)
        }
    })
}
