//! Report writers: CSV tables, DOT graphs, JSON documents.
//!
//! Floats are printed with 9 fixed decimals and rows follow a fixed order,
//! so equal inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::TagId;
use crate::meronomy::{CoverageRow, ExtensionStep, TagGraph};
use crate::priority::{DistributionSummary, PriorityMatrix};
use crate::synonymy::{SynonymGraph, SynonymGroup};
use crate::taxonomy::{TaxonAssignment, TaxonEntry};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

pub fn fixed(x: f64) -> String {
    format!("{x:.9}")
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    let io = |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

/// `game_id,tag,priority` for every positive cell, by game then tag.
pub fn write_matrix_csv(m: &PriorityMatrix, out: impl Write) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["game_id", "tag", "priority"])?;
    for (g, game) in m.games().iter().enumerate() {
        for c in m.row(g) {
            w.write_record([game.as_str(), m.tags()[c.index].as_str(), &fixed(c.priority)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TaxaOrder {
    #[default]
    Name,
    /// Decreasing median, then name.
    Median,
}

pub fn write_taxa_csv(ta: &TaxonAssignment, order: TaxaOrder, out: impl Write) -> Result<(), ExportError> {
    let mut rows: Vec<(&TagId, &TaxonEntry)> = ta.entries().iter().collect();
    if order == TaxaOrder::Median {
        rows.sort_by(|a, b| b.1.median.total_cmp(&a.1.median).then_with(|| a.0.cmp(b.0)));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tag", "taxon", "subtaxon", "median", "peak", "n_games"])?;
    for (tag, e) in rows {
        let sub = e.subtaxon.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([tag.as_str(), &e.taxon.to_string(), &sub, &fixed(e.median), &fixed(e.peak), &e.n_games.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tag_lines(tags: &[TagId], mut out: impl Write) -> Result<(), ExportError> {
    for t in tags {
        writeln!(out, "{t}")?;
    }
    Ok(())
}

/// One row per prefix of the requested list, then one per greedy step.
pub fn write_coverage_csv(rows: &[CoverageRow], steps: &[ExtensionStep], out: impl Write) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "tags", "single_pct_all_games", "single_pct_20tag_games", "pct_all_games", "pct_20tag_games"])?;
    for r in rows {
        let tags: Vec<&str> = r.tag_set.iter().map(TagId::as_str).collect();
        w.write_record([
            "prefix",
            &tags.join(";"),
            &fixed(r.single_pct_all_games),
            &fixed(r.single_pct_20tag_games),
            &fixed(r.pct_all_games),
            &fixed(r.pct_20tag_games),
        ])?;
    }
    for s in steps {
        w.write_record(["extension", s.tag.as_str(), "", "", &fixed(s.pct_all_games), &fixed(s.pct_20tag_games)])?;
    }
    w.flush()?;
    Ok(())
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Orientation graph; nodes carry `occ`, tie edges are dashed.
pub fn meronomy_dot(g: &TagGraph) -> String {
    let mut s = String::from("digraph meronomy {\n");
    for (t, occ) in &g.nodes {
        let _ = writeln!(s, "  {} [occ={occ}];", quote(t.as_str()));
    }
    for e in &g.edges {
        let style = if e.tie { " [style=dashed]" } else { "" };
        let _ = writeln!(s, "  {} -> {}{style};", quote(e.from.as_str()), quote(e.to.as_str()));
    }
    s.push_str("}\n");
    s
}

/// Synonym graph; mutual edges are double-headed, cross-taxon edges dashed.
pub fn synonyms_dot(g: &SynonymGraph) -> String {
    let mut s = String::from("digraph synonyms {\n");
    for (t, occ) in &g.nodes {
        let _ = writeln!(s, "  {} [occ={occ}];", quote(t.as_str()));
    }
    for e in &g.edges {
        let mut attrs = Vec::new();
        if e.mutual {
            attrs.push("dir=both");
        }
        if e.cross_taxon {
            attrs.push("style=dashed");
            attrs.push("color=red");
        }
        let attrs = if attrs.is_empty() { String::new() } else { format!(" [{}]", attrs.join(", ")) };
        let _ = writeln!(s, "  {} -> {}{attrs};", quote(e.from.as_str()), quote(e.to.as_str()));
    }
    s.push_str("}\n");
    s
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, ExportError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_groups_json(groups: &[SynonymGroup], mut out: impl Write) -> Result<(), ExportError> {
    out.write_all(&to_json(groups)?)?;
    Ok(())
}

#[derive(Serialize)]
struct HistogramSidecar<'a> {
    tag: &'a TagId,
    n_games: usize,
    bins: usize,
    min: f64,
    max: f64,
    median: f64,
    mean: f64,
    std: f64,
    peak_priority: f64,
}

/// Writes `bin_left,count` to `out` and the summary statistics next to it
/// with a `.json` extension. Returns the sidecar path.
pub fn export_histogram(summary: &DistributionSummary, out: &Path) -> Result<PathBuf, ExportError> {
    let mut csv_bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_bytes);
        w.write_record(["bin_left", "count"])?;
        for (i, n) in summary.histogram.iter().enumerate() {
            w.write_record([fixed(summary.bin_left(i)), n.to_string()])?;
        }
        w.flush()?;
    }
    write_file(out, &csv_bytes)?;
    let sidecar = out.with_extension("json");
    let meta = HistogramSidecar {
        tag: &summary.tag,
        n_games: summary.n_games,
        bins: summary.bins(),
        min: summary.min,
        max: summary.max,
        median: summary.median,
        mean: summary.mean,
        std: summary.std,
        peak_priority: summary.peak_priority,
    };
    write_file(&sidecar, &to_json(&meta)?)?;
    Ok(sidecar)
}
