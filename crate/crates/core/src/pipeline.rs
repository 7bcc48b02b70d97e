//! End-to-end analysis run producing every report plus a manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::corpus::{clean_corpus_with, corpus_stats, load_corpus, CleanReport, CleanRule, Corpus, CorpusStats, InputFormat, TagId};
use crate::exec::Execution;
use crate::export::{self, TaxaOrder};
use crate::meronomy::{capital_tags, coverage, greedy_cover_extension_with, orient_pairs, pearson_all_pairs_with, CapitalReport, PearsonSweep, TagGraph};
use crate::priority::{positive_priority_stats, priority_matrix, PriorityMatrix, PriorityStats};
use crate::synonymy::{build_synonym_graph, synonym_groups_with, SynonymGroup};
use crate::taxonomy::{bin_sensitive_tags, classify_taxa_with, genre_list, subdivide_high, Taxon, TaxonAssignment};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output files in the order they are produced.
pub const ARTIFACTS: [&str; 9] = [
    "matrix.csv",
    "taxa.csv",
    "genres.txt",
    "graph.dot",
    "capital.json",
    "coverage.csv",
    "groups.json",
    "stats.json",
    "manifest.json",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Load,
    Clean,
    Priority,
    Taxa,
    Meronomy,
    Capital,
    Coverage,
    Synonyms,
    Stats,
}

impl Stage {
    /// Process exit code reported by the CLI when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 3,
            Stage::Load => 4,
            Stage::Clean => 5,
            Stage::Priority => 6,
            Stage::Taxa => 7,
            Stage::Meronomy => 8,
            Stage::Capital => 9,
            Stage::Coverage => 10,
            Stage::Synonyms => 11,
            Stage::Stats => 12,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Error)]
#[error("stage {stage} failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
    /// Manifest written before aborting, if the output directory existed.
    pub partial_manifest: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub input_digest: String,
    pub config_digest: String,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    /// Every output file with its digest, in production order.
    pub fn outputs(&self) -> BTreeMap<&str, &str> {
        self.stages.iter().flat_map(|s| &s.outputs).map(|o| (o.file.as_str(), o.sha256.as_str())).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub exec: Execution,
    /// Fixed manifest timestamp; otherwise `SOURCE_DATE_EPOCH`, then the clock.
    pub timestamp: Option<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now(opts: &AnalyzeOptions) -> u64 {
    opts.timestamp
        .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok()?.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

/// Digest of the input file, or of every `*.json` page (name and bytes, in
/// name order) when `input` is a directory.
pub fn input_digest(input: &Path) -> std::io::Result<String> {
    if !input.is_dir() {
        return Ok(sha256_hex(&fs::read(input)?));
    }
    let mut pages: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    pages.sort();
    let mut h = Sha256::new();
    for p in pages {
        h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
        h.update([0]);
        h.update(fs::read(&p)?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn config_digest(cfg: &PipelineConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

/// Cleaned corpus and its priority matrix, shared by most subcommands.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub raw_stats: CorpusStats,
    pub corpus: Corpus,
    pub clean_report: CleanReport,
    pub matrix: PriorityMatrix,
}

pub fn prepare(input: &Path, cfg: &PipelineConfig) -> Result<Prepared, StageError> {
    let fail = |stage, message: String| StageError {
        stage,
        message,
        partial_manifest: None,
    };
    if !input.exists() {
        return Err(fail(Stage::Load, format!("input {} does not exist", input.display())));
    }
    let raw = load_corpus(input, InputFormat::detect(input)).map_err(|e| fail(Stage::Load, e.to_string()))?;
    let (corpus, clean_report) = clean_corpus_with(&raw, cfg.clean_options());
    if corpus.is_empty() {
        return Err(fail(Stage::Clean, "no games left after cleaning".into()));
    }
    let matrix = priority_matrix(&corpus);
    Ok(Prepared {
        raw_stats: corpus_stats(&raw),
        corpus,
        clean_report,
        matrix,
    })
}

/// Full taxa with High sub-taxa.
pub fn taxa(p: &Prepared, cfg: &PipelineConfig, exec: Execution) -> Result<TaxonAssignment, String> {
    let th = cfg.thresholds();
    let ta = classify_taxa_with(&p.matrix, &th, cfg.bins, exec).map_err(|e| e.to_string())?;
    Ok(subdivide_high(&ta, &p.corpus, &cfg.curated(), &th))
}

pub fn sweep(p: &Prepared, cfg: &PipelineConfig, exec: Execution) -> Result<PearsonSweep, String> {
    pearson_all_pairs_with(&p.matrix, cfg.global_min, cfg.correlation_mode, exec).map_err(|e| e.to_string())
}

/// Capital tags ordered by decreasing occurrence, then name.
pub fn capital_order(cap: &CapitalReport) -> Vec<TagId> {
    let mut tags: Vec<TagId> = cap.capital.iter().cloned().collect();
    tags.sort_by(|a, b| cap.induced.nodes[b].cmp(&cap.induced.nodes[a]).then_with(|| a.cmp(b)));
    tags
}

#[derive(Serialize)]
struct CapitalNode<'a> {
    tag: &'a TagId,
    occurrence: usize,
    in_degree: usize,
    capital: bool,
    in_neighbors: Vec<TagId>,
}

#[derive(Serialize)]
struct CapitalDoc<'a> {
    indegree_min: usize,
    capital: Vec<TagId>,
    nodes: Vec<CapitalNode<'a>>,
    edges: Vec<(&'a TagId, &'a TagId)>,
}

pub fn capital_json(g: &TagGraph, cap: &CapitalReport, indegree_min: usize) -> Result<Vec<u8>, export::ExportError> {
    let doc = CapitalDoc {
        indegree_min,
        capital: capital_order(cap),
        nodes: cap
            .induced
            .nodes
            .iter()
            .map(|(t, &occ)| CapitalNode {
                tag: t,
                occurrence: occ,
                in_degree: cap.in_degree[t],
                capital: cap.capital.contains(t),
                in_neighbors: g.in_neighbors(t),
            })
            .collect(),
        edges: cap.induced.edges.iter().map(|e| (&e.from, &e.to)).collect(),
    };
    export::to_json(&doc)
}

#[derive(Serialize)]
struct Stats {
    corpus_raw: CorpusStats,
    corpus_clean: CorpusStats,
    removals: BTreeMap<CleanRule, usize>,
    positive_priority: PriorityStats,
    taxa: BTreeMap<Taxon, usize>,
    taxa_warnings: Vec<String>,
    bin_sensitive_tags: Vec<TagId>,
    pairs_above_global_min: usize,
    zero_variance_tags: Vec<TagId>,
    meronomy_edges: usize,
    meronomy_tie_edges: usize,
    capital_tags: Vec<TagId>,
    capital_coverage_pct_all_games: f64,
    capital_coverage_pct_20tag_games: f64,
    extension: Vec<TagId>,
    extended_coverage_pct_all_games: f64,
    extended_coverage_pct_20tag_games: f64,
    synonym_edges: usize,
    synonym_groups: usize,
    synonym_deleted_edges: usize,
    synonym_groups_greedy: usize,
}

struct Run<'a> {
    outdir: &'a Path,
    manifest: RunManifest,
    opts: &'a AnalyzeOptions,
}

impl Run<'_> {
    fn emit(&mut self, stage: Stage, file: &str, bytes: &[u8]) -> Result<(), StageError> {
        export::write_file(&self.outdir.join(file), bytes).map_err(|e| self.fail(stage, e.to_string()))?;
        let record = OutputRecord {
            file: file.to_owned(),
            sha256: sha256_hex(bytes),
        };
        match self.manifest.stages.last_mut() {
            Some(s) if s.stage == stage => s.outputs.push(record),
            _ => self.manifest.stages.push(StageRecord {
                stage,
                outputs: vec![record],
            }),
        }
        Ok(())
    }

    fn fail(&self, stage: Stage, message: String) -> StageError {
        let mut m = self.manifest.clone();
        m.status = "failed".into();
        m.failed_stage = Some(stage);
        m.error = Some(message.clone());
        m.finished = now(self.opts);
        let path = self.outdir.join("manifest.json");
        let written = export::to_json(&m).ok().and_then(|b| fs::write(&path, b).ok()).map(|_| path);
        StageError {
            stage,
            message,
            partial_manifest: written,
        }
    }
}

fn bytes_of(f: impl FnOnce(&mut Vec<u8>) -> Result<(), export::ExportError>) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    f(&mut out).map_err(|e| e.to_string())?;
    Ok(out)
}

/// Runs every stage on `input` and writes the reports plus `manifest.json`
/// into `outdir`. A missing input fails before anything is written.
pub fn analyze(input: &Path, cfg: &PipelineConfig, outdir: &Path) -> Result<RunManifest, StageError> {
    analyze_with(input, cfg, outdir, &AnalyzeOptions::default())
}

pub fn analyze_with(input: &Path, cfg: &PipelineConfig, outdir: &Path, opts: &AnalyzeOptions) -> Result<RunManifest, StageError> {
    let early = |stage, message: String| StageError {
        stage,
        message,
        partial_manifest: None,
    };
    cfg.validate().map_err(|e| early(Stage::Config, e.to_string()))?;
    if !input.exists() {
        return Err(early(Stage::Load, format!("input {} does not exist", input.display())));
    }
    let input_digest = input_digest(input).map_err(|e| early(Stage::Load, e.to_string()))?;
    fs::create_dir_all(outdir).map_err(|e| early(Stage::Load, format!("cannot create {}: {e}", outdir.display())))?;
    let exec = opts.exec;
    let mut run = Run {
        outdir,
        opts,
        manifest: RunManifest {
            tool_version: TOOL_VERSION.to_owned(),
            input_digest,
            config_digest: config_digest(cfg),
            started: now(opts),
            finished: 0,
            status: "running".into(),
            failed_stage: None,
            error: None,
            stages: Vec::new(),
        },
    };

    let p = prepare(input, cfg).map_err(|e| run.fail(e.stage, e.message))?;
    let matrix_csv = bytes_of(|o| export::write_matrix_csv(&p.matrix, o)).map_err(|e| run.fail(Stage::Priority, e))?;
    run.emit(Stage::Priority, "matrix.csv", &matrix_csv)?;

    let ta = taxa(&p, cfg, exec).map_err(|e| run.fail(Stage::Taxa, e))?;
    let taxa_csv = bytes_of(|o| export::write_taxa_csv(&ta, TaxaOrder::Name, o)).map_err(|e| run.fail(Stage::Taxa, e))?;
    run.emit(Stage::Taxa, "taxa.csv", &taxa_csv)?;
    let genres = bytes_of(|o| export::write_tag_lines(&genre_list(&ta, &cfg.curated()), o)).map_err(|e| run.fail(Stage::Taxa, e))?;
    run.emit(Stage::Taxa, "genres.txt", &genres)?;

    let sw = sweep(&p, cfg, exec).map_err(|e| run.fail(Stage::Meronomy, e))?;
    let graph = orient_pairs(&sw.pairs, cfg.meronomy_local_min, &p.matrix);
    run.emit(Stage::Meronomy, "graph.dot", export::meronomy_dot(&graph).as_bytes())?;

    let cap = capital_tags(&graph, cfg.indegree_min);
    let cap_json = capital_json(&graph, &cap, cfg.indegree_min).map_err(|e| run.fail(Stage::Capital, e.to_string()))?;
    run.emit(Stage::Capital, "capital.json", &cap_json)?;

    let order = capital_order(&cap);
    let rows = coverage(&p.corpus, &order);
    let steps = greedy_cover_extension_with(&p.corpus, &cap.capital, cfg.coverage_extend, exec);
    let cov_csv = bytes_of(|o| export::write_coverage_csv(&rows, &steps, o)).map_err(|e| run.fail(Stage::Coverage, e))?;
    run.emit(Stage::Coverage, "coverage.csv", &cov_csv)?;

    let mut excluded = cfg.synonym_excluded.clone();
    excluded.extend(cap.capital.iter().cloned());
    let sg = build_synonym_graph(&p.matrix, &sw.pairs, cfg.synonym_local_min, &excluded, &ta);
    let groups: Vec<SynonymGroup> = synonym_groups_with(&sg, &cfg.synonym_options(), exec);
    let groups_json = bytes_of(|o| export::write_groups_json(&groups, o)).map_err(|e| run.fail(Stage::Synonyms, e))?;
    run.emit(Stage::Synonyms, "groups.json", &groups_json)?;

    let last = rows.last().expect("coverage returns at least one row");
    let (ext_all, ext_20) = steps.last().map_or((last.pct_all_games, last.pct_20tag_games), |s| (s.pct_all_games, s.pct_20tag_games));
    let stats = Stats {
        corpus_raw: p.raw_stats,
        corpus_clean: corpus_stats(&p.corpus),
        removals: [CleanRule::VrOnly, CleanRule::BelowFloor, CleanRule::OverCap, CleanRule::EmptyGame]
            .into_iter()
            .map(|r| (r, p.clean_report.count(r)))
            .collect(),
        positive_priority: positive_priority_stats(&p.matrix).map_err(|e| run.fail(Stage::Stats, e.to_string()))?,
        taxa: [Taxon::Low, Taxon::Medium, Taxon::High].into_iter().map(|t| (t, ta.count(t))).collect(),
        taxa_warnings: ta.warnings.clone(),
        bin_sensitive_tags: bin_sensitive_tags(&p.matrix, &cfg.thresholds(), 50, 200).map_err(|e| run.fail(Stage::Stats, e.to_string()))?,
        pairs_above_global_min: sw.pairs.len(),
        zero_variance_tags: sw.zero_variance.clone(),
        meronomy_edges: graph.edges.len(),
        meronomy_tie_edges: graph.edges.iter().filter(|e| e.tie).count(),
        capital_tags: order,
        capital_coverage_pct_all_games: last.pct_all_games,
        capital_coverage_pct_20tag_games: last.pct_20tag_games,
        extension: steps.iter().map(|s| s.tag.clone()).collect(),
        extended_coverage_pct_all_games: ext_all,
        extended_coverage_pct_20tag_games: ext_20,
        synonym_edges: sg.edges.len(),
        synonym_groups: groups.len(),
        synonym_deleted_edges: groups.iter().map(|g| g.deleted_edges.len()).sum(),
        synonym_groups_greedy: groups.iter().filter(|g| !g.exact).count(),
    };
    let stats_json = export::to_json(&stats).map_err(|e| run.fail(Stage::Stats, e.to_string()))?;
    run.emit(Stage::Stats, "stats.json", &stats_json)?;

    run.manifest.status = "ok".into();
    run.manifest.finished = now(opts);
    let manifest_json = export::to_json(&run.manifest).map_err(|e| run.fail(Stage::Stats, e.to_string()))?;
    export::write_file(&outdir.join("manifest.json"), &manifest_json).map_err(|e| run.fail(Stage::Stats, e.to_string()))?;
    Ok(run.manifest)
}
