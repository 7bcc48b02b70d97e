//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tagtaxa_core::corpus::{Corpus, GameRecord, TagId};
use tagtaxa_core::meronomy::{OrientedEdge, TagGraph};
use tagtaxa_core::synonymy::{SynonymEdge, SynonymGraph};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn tiny_fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/tiny12.json")
}

/// Dense `games x tags` priorities, tags in name order.
pub fn dense(c: &Corpus) -> (Vec<TagId>, Vec<Vec<f64>>) {
    let tags: Vec<TagId> = c.tags().iter().cloned().collect();
    let rows = c
        .games()
        .iter()
        .map(|g| {
            let max = g.tag_counts.values().copied().max().unwrap_or(1) as f64;
            tags.iter().map(|t| g.tag_counts.get(t).map_or(0.0, |&n| n as f64 / max)).collect()
        })
        .collect();
    (tags, rows)
}

/// Textbook two-pass Pearson; `None` on zero variance or fewer than two points.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Global and local coefficients of columns `a` and `b`.
pub fn pair_coefficients(rows: &[Vec<f64>], a: usize, b: usize) -> (Option<f64>, Option<f64>) {
    let x: Vec<f64> = rows.iter().map(|r| r[a]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[b]).collect();
    let keep: Vec<usize> = (0..rows.len()).filter(|&g| x[g] > 0.0 || y[g] > 0.0).collect();
    let lx: Vec<f64> = keep.iter().map(|&g| x[g]).collect();
    let ly: Vec<f64> = keep.iter().map(|&g| y[g]).collect();
    (pearson(&x, &y), pearson(&lx, &ly))
}

pub fn random_small_corpus(rng: &mut ChaCha8Rng, max_games: usize, n_tags: usize) -> Corpus {
    let n_games = rng.gen_range(2..=max_games);
    let games = (0..n_games)
        .map(|i| {
            let mut g = GameRecord::new(i as u64, format!("g{i}"));
            for t in 0..n_tags {
                if rng.gen_bool(0.55) {
                    g = g.with_tag(format!("t{t}"), rng.gen_range(1..=20));
                }
            }
            if g.tag_counts.is_empty() {
                g = g.with_tag("t0", 1);
            }
            g
        })
        .collect();
    Corpus::new(games).unwrap()
}

/// Games covered by any tag in `tags`, over all games and over games with
/// exactly 20 tags.
pub fn covered(c: &Corpus, tags: &[TagId]) -> (usize, usize) {
    let mut all = 0;
    let mut twenty = 0;
    for g in c.games() {
        if tags.iter().any(|t| g.tag_counts.contains_key(t)) {
            all += 1;
            if g.tag_counts.len() == 20 {
                twenty += 1;
            }
        }
    }
    (all, twenty)
}

pub fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 * 100.0 / whole as f64
    }
}

/// Reachability by repeated relaxation over an adjacency matrix.
pub fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                let via = r[k].clone();
                for (cell, &step) in r[i].iter_mut().zip(&via) {
                    *cell |= step;
                }
            }
        }
    }
    r
}

/// Every simple path from `from` to `to` of at least two edges.
pub fn long_paths(edges: &[(String, String)], from: &str, to: &str) -> Vec<Vec<String>> {
    fn walk(edges: &[(String, String)], path: &mut Vec<String>, to: &str, out: &mut Vec<Vec<String>>) {
        let here = path.last().unwrap().clone();
        for (a, b) in edges {
            if *a != here || path.contains(b) {
                continue;
            }
            path.push(b.clone());
            if b == to {
                if path.len() > 2 {
                    out.push(path.clone());
                }
            } else {
                walk(edges, path, to, out);
            }
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(edges, &mut vec![from.to_string()], to, &mut out);
    out
}

pub fn tag_graph(edges: &[(&str, &str)]) -> TagGraph {
    let mut g = TagGraph::default();
    for &(a, b) in edges {
        g.nodes.insert(a.into(), 1);
        g.nodes.insert(b.into(), 1);
        g.edges.insert(OrientedEdge { from: a.into(), to: b.into(), tie: false });
    }
    g
}

/// Random DAG on `v00..`: edges only go from a smaller to a larger index.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> (TagGraph, Vec<(usize, usize)>) {
    let mut g = TagGraph::default();
    let mut idx = Vec::new();
    for i in 0..n {
        g.nodes.insert(format!("v{i:02}").into(), 1);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                g.edges.insert(OrientedEdge { from: format!("v{i:02}").into(), to: format!("v{j:02}").into(), tie: false });
                idx.push((i, j));
            }
        }
    }
    (g, idx)
}

/// Random digraph on `v0..` without antiparallel pairs.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (SynonymGraph, Vec<(usize, usize)>) {
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for _ in 0..m {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && !pairs.contains(&(v, u)) {
            pairs.insert((u, v));
        }
    }
    let mut g = SynonymGraph::default();
    for i in 0..n {
        g.nodes.insert(format!("v{i}").into(), rng.gen_range(1..5));
    }
    g.edges = pairs
        .iter()
        .map(|&(u, v)| SynonymEdge {
            from: format!("v{u}").into(),
            to: format!("v{v}").into(),
            mutual: false,
            cross_taxon: false,
            merged_from: Vec::new(),
        })
        .collect();
    g.edges.sort();
    (g, pairs.into_iter().collect())
}

/// Every weakly connected component has exactly one vertex reachable from
/// all of its members.
pub fn well_oriented(n: usize, edges: &[(usize, usize)]) -> bool {
    let reach = closure(n, edges);
    let reaches = |a: usize, b: usize| a == b || reach[a][b];
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut Vec<usize>, x: usize) -> usize {
        if c[x] != x {
            let r = find(c, c[x]);
            c[x] = r;
        }
        c[x]
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra] = rb;
    }
    let roots: BTreeSet<usize> = (0..n).map(|v| find(&mut comp, v)).collect();
    roots.into_iter().all(|r| {
        let members: Vec<usize> = (0..n).filter(|&v| find(&mut comp.clone(), v) == r).collect();
        members.iter().filter(|&&v| members.iter().all(|&u| reaches(u, v))).count() == 1
    })
}

/// Smallest number of edges whose removal leaves a well-oriented graph,
/// by trying every subset in increasing size.
pub fn brute_min_deletion(n: usize, edges: &[(usize, usize)]) -> usize {
    let m = edges.len();
    let mut best = m;
    for mask in 0u32..(1 << m) {
        let k = mask.count_ones() as usize;
        if k >= best {
            continue;
        }
        let kept: Vec<(usize, usize)> = (0..m).filter(|&i| mask & (1 << i) == 0).map(|i| edges[i]).collect();
        if well_oriented(n, &kept) {
            best = k;
        }
    }
    best
}

/// Card-game and roguelike sinks joined through Roguelike Deckbuilder.
pub fn card_rogue() -> SynonymGraph {
    plain(&[
        ("Card Battler", "Card Game"),
        ("Deckbuilding", "Card Game"),
        ("Trading Card Game", "Card Game"),
        ("Roguelike Deckbuilder", "Card Game"),
        ("Roguelike Deckbuilder", "Deckbuilding"),
        ("Roguelike Deckbuilder", "Card Battler"),
        ("Roguelike Deckbuilder", "Rogue-lite"),
        ("Roguelike Deckbuilder", "Rogue-like"),
        ("Roguevania", "Rogue-lite"),
        ("Action Roguelike", "Rogue-lite"),
        ("Traditional Roguelike", "Rogue-like"),
        ("Rogue-lite", "Rogue-like"),
        ("Roguevania", "Rogue-like"),
    ])
}

/// Software Training is the only link between Utilities and Education.
pub fn software() -> SynonymGraph {
    plain(&[
        ("Audio Production", "Utilities"),
        ("Video Production", "Utilities"),
        ("Photo Editing", "Utilities"),
        ("Design & Illustration", "Utilities"),
        ("Web Publishing", "Utilities"),
        ("Software Training", "Utilities"),
        ("Software Training", "Education"),
        ("Photo Editing", "Design & Illustration"),
    ])
}

pub fn plain(edges: &[(&str, &str)]) -> SynonymGraph {
    let nodes: BTreeSet<&str> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let nodes: Vec<(&str, usize)> = nodes.into_iter().map(|t| (t, 1)).collect();
    synonym_graph(&nodes, edges)
}

pub fn synonym_graph(nodes: &[(&str, usize)], edges: &[(&str, &str)]) -> SynonymGraph {
    let mut g = SynonymGraph::default();
    for &(t, o) in nodes {
        g.nodes.insert(t.into(), o);
    }
    g.edges = edges
        .iter()
        .map(|&(a, b)| SynonymEdge { from: a.into(), to: b.into(), mutual: false, cross_taxon: false, merged_from: Vec::new() })
        .collect();
    g.edges.sort();
    g
}

/// Edge list of `g` as node indices in name order.
pub fn indexed_edges(g: &SynonymGraph) -> Vec<(usize, usize)> {
    let names: Vec<&TagId> = g.nodes.keys().collect();
    let at = |t: &TagId| names.iter().position(|n| *n == t).unwrap();
    g.edges.iter().map(|e| (at(&e.from), at(&e.to))).collect()
}

/// Edges left after deleting each group's `deleted_edges` from `g`.
pub fn residual(g: &SynonymGraph, deleted: &BTreeSet<(TagId, TagId)>) -> Vec<(usize, usize)> {
    let names: Vec<&TagId> = g.nodes.keys().collect();
    let at = |t: &TagId| names.iter().position(|n| *n == t).unwrap();
    g.edges
        .iter()
        .filter(|e| !deleted.contains(&(e.from.clone(), e.to.clone())))
        .map(|e| (at(&e.from), at(&e.to)))
        .collect()
}

/// Capital tags of the coverage fixture, in the order they are reported.
pub const COVERAGE_ORDER: [&str; 7] = ["Singleplayer", "Action", "Casual", "Adventure", "Strategy", "Multiplayer", "Anime"];
