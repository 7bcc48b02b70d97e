//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! The snapshot-dependent checks run only with `--paper-snapshot PATH` (or
//! `TAGTAXA_PAPER_SNAPSHOT=PATH`).

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagtaxa_core::corpus::{load_corpus, Corpus, GameRecord, InputFormat, TagId};
use tagtaxa_core::exec::Execution;
use tagtaxa_core::meronomy::{
    capital_tags, coverage, greedy_cover_extension, orient_pairs, pearson_all_pairs, transitive_reduce, OrientedEdge,
};
use tagtaxa_core::pipeline::{self, analyze_with, AnalyzeOptions, ARTIFACTS};
use tagtaxa_core::priority::positive_priority_stats;
use tagtaxa_core::synonymy::{min_deletion_exact, min_deletion_greedy, SynonymGroup};
use tagtaxa_core::synth::{broad_tag, planted_corpus, random_corpus, tiny_corpus, PlantedSpec};
use tagtaxa_core::taxonomy::{classify_taxa, Taxon, TaxaThresholds};
use tagtaxa_core::{priority_matrix, PipelineConfig};

use common::*;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn fictional_game() -> Check {
    let game = GameRecord::new(1u64, "Fictional")
        .with_tag("Adventure", 1000)
        .with_tag("Puzzle", 750)
        .with_tag("2D", 500)
        .with_tag("Atmospheric", 100);
    let c = Corpus::new(vec![game]).map_err(|e| e.to_string())?;
    let m = priority_matrix(&c);
    for (tag, want) in [("Adventure", 1.0), ("Puzzle", 0.75), ("2D", 0.5), ("Atmospheric", 0.1)] {
        let t = m.tag_index(&tag.into()).ok_or(format!("{tag} missing"))?;
        ensure!(m.priority(0, t) == want, "{tag}: {} != {want}", m.priority(0, t));
    }
    ensure!(m.tag_index(&"3D".into()).is_none(), "3D should be absent");
    Ok(())
}

fn priority_properties() -> Check {
    let c = random_corpus(500, 200, 42);
    let m = priority_matrix(&c);
    for (g, game) in c.games().iter().enumerate() {
        ensure!(m.games()[g] == game.game_id, "game order differs at {g}");
        let top = m.row(g).iter().map(|cell| cell.priority).fold(0.0, f64::max);
        ensure!(top == 1.0, "game {g} max priority {top}");
        let max = game.tag_counts.values().max().copied().unwrap_or(1) as f64;
        for (t, tag) in m.tags().iter().enumerate() {
            let want = game.tag_counts.get(tag).map_or(0.0, |&n| n as f64 / max);
            ensure!((m.priority(g, t) - want).abs() <= 1e-12, "game {g} tag {tag}");
        }
    }
    for k in [3, 1000] {
        let scaled = Corpus::new(
            c.games()
                .iter()
                .map(|g| GameRecord {
                    tag_counts: g.tag_counts.iter().map(|(t, &n)| (t.clone(), n * k)).collect(),
                    ..g.clone()
                })
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let ms = priority_matrix(&scaled);
        for g in 0..m.n_games() {
            for t in 0..m.n_tags() {
                ensure!((m.priority(g, t) - ms.priority(g, t)).abs() <= 1e-12, "scale {k} changes game {g} tag {t}");
            }
        }
    }
    Ok(())
}

fn correlation_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..50 {
        let c = random_small_corpus(&mut rng, 10, 6);
        let m = priority_matrix(&c);
        let sweep = pearson_all_pairs(&m, -2.0).map_err(|e| e.to_string())?;
        let (tags, rows) = dense(&c);
        let zero: BTreeSet<&TagId> = sweep.zero_variance.iter().collect();
        for a in 0..tags.len() {
            for b in a + 1..tags.len() {
                let (global, local) = pair_coefficients(&rows, a, b);
                let found = sweep.pairs.iter().find(|p| p.a == tags[a] && p.b == tags[b]);
                match (global, found) {
                    (Some(r), Some(p)) => {
                        ensure!((p.global_r - r).abs() < 1e-9, "round {round}: global {} vs {r}", p.global_r);
                        match (p.local_r, local) {
                            (Some(x), Some(y)) => ensure!((x - y).abs() < 1e-9, "round {round}: local {x} vs {y}"),
                            (None, None) => {}
                            other => return Err(format!("round {round}: local {other:?}")),
                        }
                    }
                    (None, None) => ensure!(zero.contains(&tags[a]) || zero.contains(&tags[b]), "round {round}: pair missing"),
                    other => return Err(format!("round {round}: {}/{}: {other:?}", tags[a], tags[b])),
                }
            }
        }
    }
    Ok(())
}

fn boundary_corpus() -> Corpus {
    let columns: [(&str, &[u64]); 4] = [
        ("Edge High", &[200_000, 574_803, 574_803, 800_000, 800_000]),
        ("Just Medium", &[200_000, 574_802, 574_802, 800_000, 800_000]),
        ("Flat Peak", &[600_000, 600_000, 600_000]),
        ("Edge Low", &[450_000]),
    ];
    let games = (0..5u64)
        .map(|g| {
            let mut game = GameRecord::new(g, format!("boundary {g}")).with_tag("Top", 1_000_000);
            for (tag, counts) in &columns {
                if let Some(&n) = counts.get(g as usize) {
                    game = game.with_tag(*tag, n);
                }
            }
            game
        })
        .collect();
    Corpus::new(games).unwrap()
}

fn taxa_boundaries() -> Check {
    let th = TaxaThresholds::default();
    ensure!(th.classify(0.574803, 0.765644) == Taxon::High, "inclusive High bounds");
    ensure!(th.classify(0.45, 1.0) == Taxon::Low, "inclusive Low bound");
    ensure!(th.classify(0.574803, 0.765643) == Taxon::Medium, "peak just below");
    let m = priority_matrix(&boundary_corpus());
    let ta = classify_taxa(&m, &th, 100).map_err(|e| e.to_string())?;
    for (tag, want) in [
        ("Top", Taxon::High),
        ("Edge High", Taxon::High),
        ("Just Medium", Taxon::Medium),
        ("Flat Peak", Taxon::Medium),
        ("Edge Low", Taxon::Low),
    ] {
        let e = ta.get(&tag.into()).ok_or(format!("{tag} missing"))?;
        ensure!(e.taxon == want, "{tag}: {:?} (median {}, peak {})", e.taxon, e.median, e.peak);
    }
    let edge = ta.get(&"Edge High".into()).unwrap();
    ensure!(edge.median == 0.574803, "median {}", edge.median);

    let coverage_fixture = fixture("coverage7.json");
    let corpora = [
        boundary_corpus(),
        tiny_corpus(),
        planted_corpus(&PlantedSpec::default(), 1),
        random_corpus(300, 80, 9),
        load_corpus(&coverage_fixture, InputFormat::detect(&coverage_fixture)).map_err(|e| e.to_string())?,
    ];
    for c in &corpora {
        let m = priority_matrix(c);
        let ta = classify_taxa(&m, &th, 100).map_err(|e| e.to_string())?;
        let sizes = ta.count(Taxon::Low) + ta.count(Taxon::Medium) + ta.count(Taxon::High);
        ensure!(sizes == m.n_tags() && ta.len() == m.n_tags(), "partition {sizes} != {}", m.n_tags());
    }
    Ok(())
}

fn capital_recovery() -> Check {
    let spec = PlantedSpec::default();
    for seed in 0..3 {
        let m = priority_matrix(&planted_corpus(&spec, seed));
        let sweep = pearson_all_pairs(&m, 0.1).map_err(|e| e.to_string())?;
        let g = orient_pairs(&sweep.pairs, -0.7, &m);
        let got = capital_tags(&g, 9).capital;
        let want: BTreeSet<TagId> = (0..spec.broad).map(|b| broad_tag(b).into()).collect();
        ensure!(got == want, "seed {seed}: {got:?}");
    }
    Ok(())
}

fn coverage_checks() -> Check {
    for seed in 0..25u64 {
        let c = random_corpus(20 + 3 * seed as usize, 40, seed);
        let n_20 = c.games().iter().filter(|g| g.tag_counts.len() == 20).count();
        let tags: Vec<TagId> = c.tags().iter().rev().step_by(2).take(10).cloned().collect();
        let rows = coverage(&c, &tags);
        for (i, row) in rows.iter().enumerate() {
            let (all, twenty) = covered(&c, &tags[..=i]);
            ensure!(row.pct_all_games == percent(all, c.len()), "seed {seed} row {i}: all games");
            ensure!(row.pct_20tag_games == percent(twenty, n_20), "seed {seed} row {i}: twenty-tag games");
            if i > 0 {
                let prev = &rows[i - 1];
                ensure!(row.pct_all_games >= prev.pct_all_games && row.pct_20tag_games >= prev.pct_20tag_games, "seed {seed}: not monotone");
            }
        }
        let steps = greedy_cover_extension(&c, &tags.iter().take(2).cloned().collect(), 5);
        let mut chosen: Vec<TagId> = tags.iter().take(2).cloned().collect();
        let mut last = covered(&c, &chosen).0;
        for s in &steps {
            let best = c
                .tags()
                .iter()
                .filter(|t| !chosen.contains(t))
                .map(|t| covered(&c, &[chosen.clone(), vec![t.clone()]].concat()).0 - last)
                .max()
                .unwrap_or(0);
            ensure!(s.newly_covered == best, "seed {seed}: greedy gain {} < {best}", s.newly_covered);
            chosen.push(s.tag.clone());
            last = covered(&c, &chosen).0;
        }
    }
    let path = fixture("coverage7.json");
    let c = load_corpus(&path, InputFormat::detect(&path)).map_err(|e| e.to_string())?;
    let tags: Vec<TagId> = COVERAGE_ORDER.iter().map(|&t| t.into()).collect();
    let cumulative: Vec<(f64, f64)> = coverage(&c, &tags).iter().map(|r| (r.pct_all_games, r.pct_20tag_games)).collect();
    let want = [(30.0, 50.0), (40.0, 75.0), (60.0, 75.0), (70.0, 75.0), (80.0, 100.0), (80.0, 100.0), (90.0, 100.0)];
    ensure!(cumulative == want, "fixture rows {cumulative:?}");
    Ok(())
}

fn deleted(groups: &[SynonymGroup]) -> BTreeSet<(TagId, TagId)> {
    groups.iter().flat_map(|g| g.deleted_edges.iter().cloned()).collect()
}

fn well_oriented_solver() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..200 {
        let n = rng.gen_range(2..=6);
        let (g, edges) = random_digraph(&mut rng, n, 8);
        let exact = deleted(&min_deletion_exact(&g, 20).map_err(|e| e.to_string())?);
        let greedy = deleted(&min_deletion_greedy(&g));
        let brute = brute_min_deletion(n, &edges);
        ensure!(exact.len() == brute, "round {round}: exact {} vs exhaustive {brute} on {edges:?}", exact.len());
        ensure!(greedy.len() >= exact.len(), "round {round}: greedy below exact");
        ensure!(well_oriented(n, &residual(&g, &exact)), "round {round}: exact residual");
        ensure!(well_oriented(n, &residual(&g, &greedy)), "round {round}: greedy residual");
    }
    let cards = deleted(&min_deletion_exact(&card_rogue(), 20).map_err(|e| e.to_string())?);
    let named: BTreeSet<(TagId, TagId)> = [
        ("Roguelike Deckbuilder".into(), "Rogue-lite".into()),
        ("Roguelike Deckbuilder".into(), "Rogue-like".into()),
    ]
    .into();
    ensure!(cards == named, "card/rogue deleted {cards:?}");
    let soft = deleted(&min_deletion_exact(&software(), 20).map_err(|e| e.to_string())?);
    ensure!(soft.len() == 1, "software deleted {soft:?}");
    Ok(())
}

fn reduction_closure() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for round in 0..100 {
        let n = rng.gen_range(2..=20);
        let (g, edges) = random_dag(&mut rng, n, 0.25);
        let (reduced, _) = transitive_reduce(&g);
        let kept: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| reduced.edges.contains(&OrientedEdge { from: format!("v{a:02}").into(), to: format!("v{b:02}").into(), tie: false }))
            .collect();
        ensure!(kept.len() == reduced.edges.len(), "round {round}: reduction added edges");
        let (before, after) = (closure(n, &edges), closure(n, &kept));
        for u in 0..n {
            for v in 0..n {
                ensure!(before[u][v] == after[u][v], "round {round}: reachability {u}->{v} changed");
            }
        }
    }
    Ok(())
}

fn snapshot_path() -> Option<PathBuf> {
    let args: Vec<String> = std::env::args().collect();
    args.iter()
        .position(|a| a == "--paper-snapshot")
        .and_then(|i| args.get(i + 1))
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("TAGTAXA_PAPER_SNAPSHOT").map(PathBuf::from))
}

fn snapshot_checks(path: &Path) -> Check {
    let cfg = PipelineConfig::default();
    let p = pipeline::prepare(path, &cfg).map_err(|e| e.to_string())?;
    let stats = positive_priority_stats(&p.matrix).map_err(|e| e.to_string())?;
    for (name, got, want) in [("mean", stats.mean, 0.60), ("median", stats.median, 0.61), ("std", stats.std, 0.28)] {
        ensure!((got - want).abs() <= 0.02, "{name} {got:.3} vs {want}");
    }
    let ta = pipeline::taxa(&p, &cfg, Execution::Parallel)?;
    for (taxon, want) in [(Taxon::Low, 80usize), (Taxon::High, 155), (Taxon::Medium, 192)] {
        let got = ta.count(taxon);
        ensure!(got.abs_diff(want) <= 5, "{taxon} has {got} tags, expected {want}");
    }
    let sweep = pipeline::sweep(&p, &cfg, Execution::Parallel)?;
    let g = orient_pairs(&sweep.pairs, cfg.meronomy_local_min, &p.matrix);
    let cap = capital_tags(&g, cfg.indegree_min);
    let want: BTreeSet<TagId> =
        ["Multiplayer", "Singleplayer", "Action", "Casual", "Adventure", "Strategy", "Anime"].iter().map(|&t| t.into()).collect();
    ensure!(cap.capital == want, "capital set {:?}", cap.capital);
    let order = pipeline::capital_order(&cap);
    let last = coverage(&p.corpus, &order).pop().unwrap();
    ensure!((last.pct_all_games - 94.0).abs() <= 1.0, "capital coverage {:.2}%", last.pct_all_games);
    ensure!((last.pct_20tag_games - 98.0).abs() <= 1.0, "twenty-tag coverage {:.2}%", last.pct_20tag_games);
    let steps = greedy_cover_extension(&p.corpus, &cap.capital, 6);
    let end = steps.last().ok_or("no extension steps")?;
    ensure!(end.pct_all_games >= 96.7 && end.pct_20tag_games >= 99.7, "extended coverage {:.2}% / {:.2}%", end.pct_all_games, end.pct_20tag_games);
    Ok(())
}

fn determinism() -> Check {
    let cfg = PipelineConfig::default();
    let run = || -> Result<Vec<Vec<u8>>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = AnalyzeOptions { exec: Execution::Parallel, timestamp: Some(1_700_000_000) };
        analyze_with(&tiny_fixture(), &cfg, dir.path(), &opts).map_err(|e| e.to_string())?;
        ARTIFACTS.iter().map(|f| fs::read(dir.path().join(f)).map_err(|e| format!("{f}: {e}"))).collect()
    };
    let (first, second) = (run()?, run()?);
    for (name, (a, b)) in ARTIFACTS.iter().zip(first.iter().zip(&second)) {
        ensure!(a == b, "{name} differs between runs");
    }
    Ok(())
}

enum Outcome {
    Pass,
    Fail(String),
    Skip(String),
}

fn run(check: impl FnOnce() -> Check + panic::UnwindSafe, budget: Option<Duration>) -> (Outcome, Duration) {
    let start = Instant::now();
    let result = panic::catch_unwind(check);
    let elapsed = start.elapsed();
    let outcome = match result {
        Ok(Ok(())) => match budget {
            Some(b) if elapsed > b => Outcome::Fail(format!("took {elapsed:.2?}, budget {b:.0?}")),
            _ => Outcome::Pass,
        },
        Ok(Err(msg)) => Outcome::Fail(msg),
        Err(_) => Outcome::Fail("panicked".into()),
    };
    (outcome, elapsed)
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: Vec<Criterion> = vec![
        ("fictional game priorities", fictional_game, secs(1)),
        ("priority properties", priority_properties, secs(5)),
        ("pearson oracle", correlation_oracle, secs(5)),
        ("taxa boundaries and partition", taxa_boundaries, None),
        ("capital tag recovery", capital_recovery, secs(10)),
        ("coverage oracle and fixture", coverage_checks, None),
        ("well-oriented solver", well_oriented_solver, secs(60)),
        ("transitive reduction closure", reduction_closure, secs(10)),
    ];
    let mut failed = 0;
    let mut report = |n: usize, name: &str, (outcome, elapsed): (Outcome, Duration)| {
        match outcome {
            Outcome::Pass => println!("PASS {n:>2} {name} ({elapsed:.2?})"),
            Outcome::Fail(msg) => {
                failed += 1;
                println!("FAIL {n:>2} {name} ({elapsed:.2?}): {msg}");
            }
            Outcome::Skip(why) => println!("SKIP {n:>2} {name}: {why}"),
        }
    };
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        report(i + 1, name, run(check, budget));
    }
    let snapshot = match snapshot_path() {
        Some(path) => run(move || snapshot_checks(&path), None),
        None => (Outcome::Skip("no --paper-snapshot given".into()), Duration::ZERO),
    };
    report(9, "era snapshot figures", snapshot);
    report(10, "end-to-end determinism", run(determinism, None));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
