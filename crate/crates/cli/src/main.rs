//! `tagtaxa` command-line frontend.
//!
//! Exit codes: 0 success, 1 I/O or other errors, 2 usage errors, 3 invalid
//! configuration, 4..=12 a failing pipeline stage (load, clean, priority,
//! taxa, meronomy, capital, coverage, synonyms, stats).

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tagtaxa_core::config::{ConfigError, PipelineConfig};
use tagtaxa_core::corpus::{clean_corpus_with, load_corpus, write_csv, write_snapshot_json, InputFormat};
use tagtaxa_core::exec::{configure_threads, Execution};
use tagtaxa_core::export::{self, TaxaOrder};
use tagtaxa_core::fetch::{self, FetchOptions};
use tagtaxa_core::meronomy::{capital_tags, coverage, greedy_cover_extension_with, orient_pairs, transitive_reduce};
use tagtaxa_core::pipeline::{self, AnalyzeOptions, Prepared, Stage, StageError};
use tagtaxa_core::priority::{pair_ratio_analysis, positive_priority_stats, tag_distribution};
use tagtaxa_core::synonymy::{build_synonym_graph, synonym_groups_with};
use tagtaxa_core::taxonomy::genre_list;
use tagtaxa_core::TagId;

#[derive(Parser)]
#[command(name = "tagtaxa", version, about = "Taxonomy, meronomy and synonym analysis of player-assigned game tags")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Only report errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Snapshot JSON file, directory of JSON pages, or CSV file.
    input: PathBuf,
    /// Skip the 5-player floor when cleaning.
    #[arg(long)]
    no_floor: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Download snapshot pages into the cache.
    Fetch {
        #[arg(long, default_value = "0..1")]
        pages: String,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Delete cached pages first.
        #[arg(long)]
        purge: bool,
        #[arg(long, default_value = fetch::DEFAULT_ENDPOINT)]
        endpoint: String,
        #[arg(long, default_value_t = 1000)]
        delay_ms: u64,
        #[arg(long, default_value_t = 3)]
        retries: u32,
    },
    /// Apply the cleaning rules and write the cleaned corpus.
    Clean {
        input: PathBuf,
        /// Output path; `.csv` selects CSV, anything else snapshot JSON.
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        no_floor: bool,
    },
    /// Write the priority matrix.
    Priority {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print pooled statistics of positive priorities instead.
        #[arg(long)]
        stats: bool,
    },
    /// Histogram of one tag's priorities.
    Dist {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Priority ratios of tag B to tag A where A has more assigners.
    Ratios {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify tags into Low / Medium / High taxa.
    Taxa {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SortBy::Name)]
        sort: SortBy,
    },
    /// List genre tags.
    Genres {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orientation graph of correlated tag pairs as DOT.
    Meronomy {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        global_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        local_min: Option<f64>,
        /// Drop edges implied by longer paths.
        #[arg(long)]
        reduce: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capital tags of the orientation graph.
    Capital {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        indegree_min: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Share of games covered by growing tag sets.
    Coverage {
        #[command(flatten)]
        input: Input,
        /// One tag per line; defaults to the capital tags.
        #[arg(long)]
        tags: Option<PathBuf>,
        /// Greedily add K tags to the set.
        #[arg(long)]
        extend: Option<usize>,
        #[arg(long, value_enum, default_value_t = CoverageSort::Given)]
        sort: CoverageSort,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synonym groups and their representatives.
    Synonyms {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        local_min: Option<f64>,
        /// Tags to exclude besides the capital tags, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        exact_budget: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Run every stage and write all reports into a directory.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SortBy {
    Name,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoverageSort {
    /// Keep the order of the tag list.
    Given,
    /// Decreasing single-tag coverage.
    Coverage,
}

/// Error carrying its process exit code.
#[derive(Debug)]
struct Exit(u8, anyhow::Error);

fn classify(err: anyhow::Error) -> Exit {
    if let Some(s) = err.downcast_ref::<StageError>() {
        return Exit(s.stage.exit_code() as u8, err);
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return Exit(Stage::Config.exit_code() as u8, err);
    }
    Exit(1, err)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => export::write_file(p, bytes).map_err(Into::into),
        None => std::io::stdout().write_all(bytes).context("writing to stdout"),
    }
}

fn read_tag_list(path: &Path) -> Result<Vec<TagId>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(TagId::from).collect())
}

struct Ctx {
    cfg: PipelineConfig,
    exec: Execution,
}

impl Ctx {
    fn prepare(&self, input: &Input) -> Result<Prepared> {
        let mut cfg = self.cfg.clone();
        if input.no_floor {
            cfg.min_players = 0;
        }
        Ok(pipeline::prepare(&input.input, &cfg)?)
    }
}

fn stage<T>(stage: Stage, r: Result<T, String>) -> Result<T> {
    r.map_err(|message| {
        StageError {
            stage,
            message,
            partial_manifest: None,
        }
        .into()
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::load_or_default(cli.config.as_deref())?;
    let exec = if cli.jobs == 1 { Execution::Sequential } else { Execution::Parallel };
    if cli.jobs > 1 && !configure_threads(cli.jobs) {
        log::warn!("could not resize the worker pool to {} threads", cli.jobs);
    }
    let ctx = Ctx { cfg, exec };
    match cli.command {
        Command::Fetch {
            pages,
            cache,
            purge,
            endpoint,
            delay_ms,
            retries,
        } => {
            let dir = fetch::resolve_cache_dir(cache.as_deref(), ctx.cfg.cache_dir.as_deref());
            if purge {
                let n = fetch::purge_cache(&dir)?;
                log::info!("purged {n} cached pages from {}", dir.display());
            }
            let range = fetch::parse_page_range(&pages)?;
            let opts = FetchOptions {
                delay: Duration::from_millis(delay_ms),
                retries,
            };
            let report = fetch::fetch_snapshot(&endpoint, range, &dir, opts)?;
            eprintln!("{} pages fetched, {} cached, into {}", report.written.len(), report.cached.len(), dir.display());
        }
        Command::Clean {
            input,
            output,
            report,
            no_floor,
        } => {
            let mut cfg = ctx.cfg.clone();
            if no_floor {
                cfg.min_players = 0;
            }
            let raw = load_corpus(&input, InputFormat::detect(&input)).map_err(|e| StageError {
                stage: Stage::Load,
                message: e.to_string(),
                partial_manifest: None,
            })?;
            let (clean, rep) = clean_corpus_with(&raw, cfg.clean_options());
            let mut bytes = Vec::new();
            match InputFormat::detect(&output) {
                InputFormat::Csv => write_csv(&clean, &mut bytes)?,
                InputFormat::SnapshotJson => write_snapshot_json(&clean, &mut bytes)?,
            }
            export::write_file(&output, &bytes)?;
            if let Some(path) = report {
                export::write_file(&path, &export::to_json(&rep)?)?;
            }
            log::info!("{} of {} games kept, {} removals", rep.games_out, rep.games_in, rep.removals.len());
        }
        Command::Priority { input, out, stats } => {
            let p = ctx.prepare(&input)?;
            if stats {
                let s = stage(Stage::Priority, positive_priority_stats(&p.matrix).map_err(|e| e.to_string()))?;
                emit(out.as_deref(), &export::to_json(&s)?)?;
            } else {
                let mut bytes = Vec::new();
                export::write_matrix_csv(&p.matrix, &mut bytes)?;
                emit(out.as_deref(), &bytes)?;
            }
        }
        Command::Dist { input, tag, bins, out } => {
            let p = ctx.prepare(&input)?;
            let d = stage(Stage::Priority, tag_distribution(&p.matrix, &tag.into(), bins.unwrap_or(ctx.cfg.bins)).map_err(|e| e.to_string()))?;
            export::export_histogram(&d, &out)?;
        }
        Command::Ratios { input, a, b, out } => {
            let p = ctx.prepare(&input)?;
            let r = stage(Stage::Priority, pair_ratio_analysis(&p.matrix, &a.into(), &b.into()).map_err(|e| e.to_string()))?;
            emit(out.as_deref(), &export::to_json(&r)?)?;
        }
        Command::Taxa { input, out, sort } => {
            let p = ctx.prepare(&input)?;
            let ta = stage(Stage::Taxa, pipeline::taxa(&p, &ctx.cfg, ctx.exec))?;
            let order = match sort {
                SortBy::Name => TaxaOrder::Name,
                SortBy::Median => TaxaOrder::Median,
            };
            let mut bytes = Vec::new();
            export::write_taxa_csv(&ta, order, &mut bytes)?;
            emit(out.as_deref(), &bytes)?;
        }
        Command::Genres { input, out } => {
            let p = ctx.prepare(&input)?;
            let ta = stage(Stage::Taxa, pipeline::taxa(&p, &ctx.cfg, ctx.exec))?;
            let mut bytes = Vec::new();
            export::write_tag_lines(&genre_list(&ta, &ctx.cfg.curated()), &mut bytes)?;
            emit(out.as_deref(), &bytes)?;
        }
        Command::Meronomy {
            input,
            global_min,
            local_min,
            reduce,
            out,
        } => {
            let mut cfg = ctx.cfg.clone();
            cfg.global_min = global_min.unwrap_or(cfg.global_min);
            cfg.meronomy_local_min = local_min.unwrap_or(cfg.meronomy_local_min);
            cfg.validate()?;
            let p = ctx.prepare(&input)?;
            let sw = stage(Stage::Meronomy, pipeline::sweep(&p, &cfg, ctx.exec))?;
            let mut g = orient_pairs(&sw.pairs, cfg.meronomy_local_min, &p.matrix);
            log::info!("{} pairs above global minimum, {} edges kept", sw.pairs.len(), g.edges.len());
            if reduce {
                let (reduced, removed) = transitive_reduce(&g);
                log::info!("{} redundant edges removed", removed.len());
                g = reduced;
            }
            emit(out.as_deref(), export::meronomy_dot(&g).as_bytes())?;
        }
        Command::Capital { input, indegree_min, out } => {
            let p = ctx.prepare(&input)?;
            let sw = stage(Stage::Meronomy, pipeline::sweep(&p, &ctx.cfg, ctx.exec))?;
            let g = orient_pairs(&sw.pairs, ctx.cfg.meronomy_local_min, &p.matrix);
            let k = indegree_min.unwrap_or(ctx.cfg.indegree_min);
            let cap = capital_tags(&g, k);
            emit(out.as_deref(), &pipeline::capital_json(&g, &cap, k)?)?;
        }
        Command::Coverage {
            input,
            tags,
            extend,
            sort,
            out,
        } => {
            let p = ctx.prepare(&input)?;
            let mut list = match &tags {
                Some(path) => read_tag_list(path)?,
                None => {
                    let sw = stage(Stage::Meronomy, pipeline::sweep(&p, &ctx.cfg, ctx.exec))?;
                    let g = orient_pairs(&sw.pairs, ctx.cfg.meronomy_local_min, &p.matrix);
                    pipeline::capital_order(&capital_tags(&g, ctx.cfg.indegree_min))
                }
            };
            if let CoverageSort::Coverage = sort {
                let occ = p.corpus.occurrences();
                list.sort_by(|a, b| occ.get(b).cmp(&occ.get(a)).then_with(|| a.cmp(b)));
            }
            let rows = coverage(&p.corpus, &list);
            let base: BTreeSet<TagId> = list.iter().cloned().collect();
            let steps = extend.map(|k| greedy_cover_extension_with(&p.corpus, &base, k, ctx.exec)).unwrap_or_default();
            let mut bytes = Vec::new();
            export::write_coverage_csv(&rows, &steps, &mut bytes)?;
            emit(out.as_deref(), &bytes)?;
        }
        Command::Synonyms {
            input,
            local_min,
            exclude,
            exact_budget,
            out,
            dot,
        } => {
            let mut cfg = ctx.cfg.clone();
            cfg.synonym_local_min = local_min.unwrap_or(cfg.synonym_local_min);
            cfg.exact_budget = exact_budget.unwrap_or(cfg.exact_budget);
            if let Some(path) = &exclude {
                cfg.synonym_excluded = read_tag_list(path)?.into_iter().collect();
            }
            cfg.validate()?;
            let p = ctx.prepare(&input)?;
            let ta = stage(Stage::Taxa, pipeline::taxa(&p, &cfg, ctx.exec))?;
            let sw = stage(Stage::Meronomy, pipeline::sweep(&p, &cfg, ctx.exec))?;
            let g = orient_pairs(&sw.pairs, cfg.meronomy_local_min, &p.matrix);
            let mut excluded = cfg.synonym_excluded.clone();
            excluded.extend(capital_tags(&g, cfg.indegree_min).capital);
            let sg = build_synonym_graph(&p.matrix, &sw.pairs, cfg.synonym_local_min, &excluded, &ta);
            if let Some(path) = &dot {
                export::write_file(path, export::synonyms_dot(&sg).as_bytes())?;
            }
            let groups = synonym_groups_with(&sg, &cfg.synonym_options(), ctx.exec);
            let mut bytes = Vec::new();
            export::write_groups_json(&groups, &mut bytes)?;
            emit(out.as_deref(), &bytes)?;
        }
        Command::Analyze { input, out } => {
            let mut cfg = ctx.cfg.clone();
            if input.no_floor {
                cfg.min_players = 0;
            }
            let opts = AnalyzeOptions {
                exec: ctx.exec,
                timestamp: None,
            };
            let manifest = pipeline::analyze_with(&input.input, &cfg, &out, &opts)?;
            if manifest.status != "ok" {
                bail!("analysis ended with status {}", manifest.status);
            }
            log::info!("wrote {} reports to {}", manifest.outputs().len() + 1, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli).map_err(classify) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

