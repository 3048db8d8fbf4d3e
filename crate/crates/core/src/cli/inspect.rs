use std::io::Write;

use crate::embed::dot_i8;
use crate::index::{IndexError, SidecarFetcher};

use super::{open_configured_index, CliError, Config, Result};

const TOP_COORDINATES: usize = 8;

fn describe_row(row: &[i8], out: &mut dyn Write) -> Result<()> {
    let norm_sq = dot_i8(row, row);
    if norm_sq == 0 {
        writeln!(out, "status\tempty representation")?;
        return Ok(());
    }
    writeln!(out, "norm\t{:.3}", f64::from(norm_sq).sqrt())?;
    let mut coords: Vec<(usize, i8)> = row.iter().copied().enumerate().collect();
    coords.sort_by(|a, b| b.1.unsigned_abs().cmp(&a.1.unsigned_abs()).then(a.0.cmp(&b.0)));
    let top: Vec<String> = coords.iter().take(TOP_COORDINATES).map(|(i, v)| format!("{i}:{v}")).collect();
    writeln!(out, "top\t{}", top.join(" "))?;
    Ok(())
}

pub(super) fn cmd_inspect(cfg: &Config, doc: Option<u64>, token: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let bundle = open_configured_index(cfg)?;
    let vocab = bundle.vocabulary();
    let doc_row = doc.map(|id| bundle.row_of_doc(id).ok_or(IndexError::UnknownDocId(id))).transpose()?;
    let token_id = token.map(|t| vocab.id_of(t).ok_or_else(|| CliError::UnknownToken(t.to_string()))).transpose()?;
    let doc_tokens = match (doc, &cfg.paths.sidecar) {
        (Some(id), Some(sidecar)) => Some(SidecarFetcher::new(&bundle, sidecar)?.fetch(id)?),
        _ => None,
    };

    let h = bundle.header();
    writeln!(out, "version\t{}", h.version)?;
    writeln!(out, "dim\t{}", h.dim)?;
    writeln!(out, "jl_seed\t{}", h.jl_seed)?;
    writeln!(out, "n_docs\t{}", h.n_docs)?;
    writeln!(out, "n_tokens\t{}", h.n_tokens)?;
    writeln!(out, "min_count\t{}", h.min_count)?;
    if let (Some(doc_id), Some(row)) = (doc, doc_row) {
        writeln!(out, "doc_id\t{doc_id}")?;
        writeln!(out, "row\t{row}")?;
        describe_row(bundle.doc_vector(row), out)?;
        if let Some(tokens) = doc_tokens {
            let list: Vec<String> =
                tokens.iter().map(|&(id, c)| format!("{}:{c}", vocab.token(id).unwrap_or("?"))).collect();
            writeln!(out, "tokens\t{}", list.join(" "))?;
        }
    }
    if let (Some(token), Some(id)) = (token, token_id) {
        writeln!(out, "token\t{token}")?;
        writeln!(out, "token_id\t{id}")?;
        writeln!(out, "corpus_count\t{}", vocab.corpus_count(id).unwrap_or(0))?;
        describe_row(bundle.token_vector(id), out)?;
    }
    Ok(())
}
