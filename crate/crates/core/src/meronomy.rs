//! Correlation-gated orientation graph, capital tags, coverage and
//! Hasse-style transitive reduction.
//!
//! A pair of tags is kept when its Pearson coefficient over all games
//! exceeds a global minimum and its *local* coefficient (over games carrying
//! at least one of the two tags) exceeds a local minimum. Each kept pair
//! becomes an edge pointing at the tag assigned to more games.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, TagId, MAX_TAGS_PER_GAME};
use crate::exec::{self, Execution};
use crate::graph::Digraph;
use crate::priority::PriorityMatrix;

pub const DEFAULT_GLOBAL_MIN: f64 = 0.1;
pub const DEFAULT_MERONOMY_LOCAL_MIN: f64 = -0.7;
pub const DEFAULT_INDEGREE_MIN: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum MeronomyError {
    #[error("correlation needs at least 2 games, got {0}")]
    TooFewGames(usize),
    #[error("tag {0} does not occur in the matrix")]
    UnknownTag(TagId),
    #[error("zero variance for {a}/{b} on the restricted game set")]
    ZeroVariance { a: TagId, b: TagId },
}

/// Values fed to the correlation: priorities, or 0/1 presence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    #[default]
    Priority,
    Presence,
}

impl CorrelationMode {
    fn value(self, priority: f64) -> f64 {
        match self {
            CorrelationMode::Priority => priority,
            CorrelationMode::Presence => 1.0,
        }
    }
}

/// A correlated tag pair, `a < b` lexicographically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPair {
    pub a: TagId,
    pub b: TagId,
    pub global_r: f64,
    /// `None` when either restricted vector has zero variance.
    pub local_r: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PearsonSweep {
    pub pairs: Vec<CorrelatedPair>,
    /// Tags excluded because their vector over all games is constant.
    pub zero_variance: Vec<TagId>,
}

#[derive(Clone, Copy, Debug)]
struct Moments {
    len: usize,
    sum: f64,
    sum_sq: f64,
    /// All stored values equal.
    constant: bool,
}

fn moments(m: &PriorityMatrix, t: usize, mode: CorrelationMode) -> Moments {
    let col = m.column(t);
    let first = col.first().map(|c| mode.value(c.priority));
    Moments {
        len: col.len(),
        sum: col.iter().map(|c| mode.value(c.priority)).sum(),
        sum_sq: col.iter().map(|c| mode.value(c.priority).powi(2)).sum(),
        constant: col.iter().all(|c| Some(mode.value(c.priority)) == first),
    }
}

/// Pearson coefficient over `n` rows from raw sums; unset rows are zero.
fn pearson_from_sums(n: usize, a: &Moments, b: &Moments, sum_xy: f64) -> f64 {
    let n = n as f64;
    let cov = n * sum_xy - a.sum * b.sum;
    let var_a = n * a.sum_sq - a.sum * a.sum;
    let var_b = n * b.sum_sq - b.sum * b.sum;
    (cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0)
}

/// Restricted to the union of the two supports, a vector is constant iff it
/// covers the whole union with one repeated value.
fn local_from_sums(a: &Moments, b: &Moments, inter: usize, sum_xy: f64) -> Option<f64> {
    let union = a.len + b.len - inter;
    let const_a = a.len == union && a.constant;
    let const_b = b.len == union && b.constant;
    (!const_a && !const_b && union >= 2).then(|| pearson_from_sums(union, a, b, sum_xy))
}

pub fn pearson_all_pairs(m: &PriorityMatrix, global_min: f64) -> Result<PearsonSweep, MeronomyError> {
    pearson_all_pairs_with(m, global_min, CorrelationMode::default(), Execution::default())
}

/// Sweeps every tag pair and keeps those with `global_r > global_min`.
/// The local coefficient of each kept pair is filled in from the same sums.
///
/// Work is split by first tag; each worker scatters that tag's column into a
/// dense scratch row and walks the later columns. Per-pair summation order
/// does not depend on scheduling.
pub fn pearson_all_pairs_with(
    m: &PriorityMatrix,
    global_min: f64,
    mode: CorrelationMode,
    exec: Execution,
) -> Result<PearsonSweep, MeronomyError> {
    let n = m.n_games();
    if n < 2 {
        return Err(MeronomyError::TooFewGames(n));
    }
    let stats: Vec<Moments> = (0..m.n_tags()).map(|t| moments(m, t, mode)).collect();
    let usable: Vec<bool> = stats.iter().map(|s| s.len > 0 && !(s.len == n && s.constant)).collect();
    let zero_variance: Vec<TagId> = (0..m.n_tags()).filter(|&t| !usable[t]).map(|t| m.tags()[t].clone()).collect();
    for t in &zero_variance {
        log::warn!("tag {t} has zero variance over all games; skipped");
    }

    let per_tag = exec::map_range_init(
        exec,
        m.n_tags(),
        || (vec![0.0f64; n], vec![usize::MAX; n]),
        |(dense, stamp), a| {
            let mut found = Vec::new();
            if !usable[a] {
                return found;
            }
            for c in m.column(a) {
                dense[c.index] = mode.value(c.priority);
                stamp[c.index] = a;
            }
            for b in a + 1..m.n_tags() {
                if !usable[b] {
                    continue;
                }
                let mut sum_xy = 0.0;
                let mut inter = 0usize;
                for c in m.column(b) {
                    if stamp[c.index] == a {
                        sum_xy += dense[c.index] * mode.value(c.priority);
                        inter += 1;
                    }
                }
                let global_r = pearson_from_sums(n, &stats[a], &stats[b], sum_xy);
                if global_r > global_min {
                    found.push(CorrelatedPair {
                        a: m.tags()[a].clone(),
                        b: m.tags()[b].clone(),
                        global_r,
                        local_r: local_from_sums(&stats[a], &stats[b], inter, sum_xy),
                    });
                }
            }
            found
        },
    );
    Ok(PearsonSweep {
        pairs: per_tag.into_iter().flatten().collect(),
        zero_variance,
    })
}

pub fn local_pearson(m: &PriorityMatrix, a: &TagId, b: &TagId) -> Result<f64, MeronomyError> {
    local_pearson_with(m, a, b, CorrelationMode::default())
}

/// Pearson coefficient restricted to games carrying `a` or `b`.
pub fn local_pearson_with(m: &PriorityMatrix, a: &TagId, b: &TagId, mode: CorrelationMode) -> Result<f64, MeronomyError> {
    let ia = m.tag_index(a).ok_or_else(|| MeronomyError::UnknownTag(a.clone()))?;
    let ib = m.tag_index(b).ok_or_else(|| MeronomyError::UnknownTag(b.clone()))?;
    let (ca, cb) = (m.column(ia), m.column(ib));
    let (mut i, mut j, mut inter, mut sum_xy) = (0, 0, 0usize, 0.0);
    while i < ca.len() && j < cb.len() {
        match ca[i].index.cmp(&cb[j].index) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum_xy += mode.value(ca[i].priority) * mode.value(cb[j].priority);
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let (sa, sb) = (moments(m, ia, mode), moments(m, ib, mode));
    local_from_sums(&sa, &sb, inter, sum_xy).ok_or_else(|| {
        log::warn!("zero variance for {a}/{b} on the local game set; pair dropped");
        MeronomyError::ZeroVariance {
            a: a.clone(),
            b: b.clone(),
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub from: TagId,
    pub to: TagId,
    /// Both endpoints occur equally often; direction fell back to name order.
    pub tie: bool,
}

/// Orientation graph: nodes carry occurrence counts (games with positive
/// priority).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagGraph {
    pub nodes: BTreeMap<TagId, usize>,
    pub edges: BTreeSet<OrientedEdge>,
}

impl TagGraph {
    pub fn in_degrees(&self) -> BTreeMap<TagId, usize> {
        let mut deg: BTreeMap<TagId, usize> = self.nodes.keys().map(|t| (t.clone(), 0)).collect();
        for e in &self.edges {
            *deg.get_mut(&e.to).expect("edge endpoint is a node") += 1;
        }
        deg
    }

    pub fn out_degree(&self, tag: &TagId) -> usize {
        self.edges.iter().filter(|e| &e.from == tag).count()
    }

    pub fn in_neighbors(&self, tag: &TagId) -> Vec<TagId> {
        self.edges.iter().filter(|e| &e.to == tag).map(|e| e.from.clone()).collect()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from.as_str() == from && e.to.as_str() == to)
    }

    /// Index view: node `i` is the `i`-th tag in lexicographic order.
    pub(crate) fn to_digraph(&self) -> (Vec<TagId>, Digraph) {
        let names: Vec<TagId> = self.nodes.keys().cloned().collect();
        let index: BTreeMap<&TagId, usize> = names.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut g = Digraph::new(names.len());
        for e in &self.edges {
            g.add_edge(index[&e.from], index[&e.to]);
        }
        (names, g)
    }
}

/// Keeps pairs with `local_r > local_min` and points each at the endpoint
/// with the larger occurrence. Equal occurrences point at the
/// lexicographically smaller name and are flagged as ties.
pub fn orient_pairs(pairs: &[CorrelatedPair], local_min: f64, m: &PriorityMatrix) -> TagGraph {
    let mut g = TagGraph::default();
    for p in pairs {
        let Some(local) = p.local_r else { continue };
        if local <= local_min {
            continue;
        }
        let (Some(ia), Some(ib)) = (m.tag_index(&p.a), m.tag_index(&p.b)) else {
            continue;
        };
        let (oa, ob) = (m.occurrence(ia), m.occurrence(ib));
        let (small, large) = if p.a <= p.b { (&p.a, &p.b) } else { (&p.b, &p.a) };
        let edge = match oa.cmp(&ob) {
            std::cmp::Ordering::Less => OrientedEdge { from: p.a.clone(), to: p.b.clone(), tie: false },
            std::cmp::Ordering::Greater => OrientedEdge { from: p.b.clone(), to: p.a.clone(), tie: false },
            std::cmp::Ordering::Equal => OrientedEdge { from: large.clone(), to: small.clone(), tie: true },
        };
        g.nodes.insert(p.a.clone(), oa);
        g.nodes.insert(p.b.clone(), ob);
        g.edges.insert(edge);
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapitalReport {
    /// Subgraph induced by nodes with in-degree `>= indegree_min` in the
    /// full graph.
    pub induced: TagGraph,
    /// In-degrees in the full graph, for the induced nodes.
    pub in_degree: BTreeMap<TagId, usize>,
    /// Induced nodes with no outgoing edge inside the induced subgraph.
    pub capital: BTreeSet<TagId>,
}

pub fn capital_tags(g: &TagGraph, indegree_min: usize) -> CapitalReport {
    let in_degree: BTreeMap<TagId, usize> = g
        .in_degrees()
        .into_iter()
        .filter(|&(_, d)| d >= indegree_min && d > 0)
        .collect();
    let induced = TagGraph {
        nodes: g.nodes.iter().filter(|(t, _)| in_degree.contains_key(*t)).map(|(t, &o)| (t.clone(), o)).collect(),
        edges: g
            .edges
            .iter()
            .filter(|e| in_degree.contains_key(&e.from) && in_degree.contains_key(&e.to))
            .cloned()
            .collect(),
    };
    let capital = induced.nodes.keys().filter(|t| induced.out_degree(t) == 0).cloned().collect();
    CapitalReport {
        induced,
        in_degree,
        capital,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    /// The prefix of the requested tag list this row covers.
    pub tag_set: Vec<TagId>,
    /// Coverage of the last tag of the prefix on its own.
    pub single_pct_all_games: f64,
    pub single_pct_20tag_games: f64,
    pub pct_all_games: f64,
    pub pct_20tag_games: f64,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Cumulative coverage of each prefix of `tags`: a game is covered when at
/// least one tag of the prefix is assigned to it. An empty list yields one
/// all-zero row.
pub fn coverage(c: &Corpus, tags: &[TagId]) -> Vec<CoverageRow> {
    let n_all = c.len();
    let twenty: Vec<bool> = c.games().iter().map(|g| g.tag_counts.len() == MAX_TAGS_PER_GAME).collect();
    let n_20 = twenty.iter().filter(|&&b| b).count();
    if tags.is_empty() {
        return vec![CoverageRow {
            tag_set: Vec::new(),
            single_pct_all_games: 0.0,
            single_pct_20tag_games: 0.0,
            pct_all_games: 0.0,
            pct_20tag_games: 0.0,
        }];
    }
    let mut covered = vec![false; n_all];
    let (mut cov_all, mut cov_20) = (0, 0);
    let mut rows = Vec::with_capacity(tags.len());
    for (i, tag) in tags.iter().enumerate() {
        let (mut single_all, mut single_20) = (0, 0);
        for (g, game) in c.games().iter().enumerate() {
            if !game.tag_counts.contains_key(tag) {
                continue;
            }
            single_all += 1;
            single_20 += twenty[g] as usize;
            if !covered[g] {
                covered[g] = true;
                cov_all += 1;
                cov_20 += twenty[g] as usize;
            }
        }
        rows.push(CoverageRow {
            tag_set: tags[..=i].to_vec(),
            single_pct_all_games: pct(single_all, n_all),
            single_pct_20tag_games: pct(single_20, n_20),
            pct_all_games: pct(cov_all, n_all),
            pct_20tag_games: pct(cov_20, n_20),
        });
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionStep {
    pub tag: TagId,
    pub newly_covered: usize,
    /// Cumulative coverage of base plus every tag picked so far.
    pub pct_all_games: f64,
    pub pct_20tag_games: f64,
}

pub fn greedy_cover_extension(c: &Corpus, base: &BTreeSet<TagId>, k: usize) -> Vec<ExtensionStep> {
    greedy_cover_extension_with(c, base, k, Execution::default())
}

/// Appends up to `k` tags to `base`, each time the one covering the most
/// not-yet-covered games (ties: smallest name). Stops early only when no
/// candidate tags remain.
pub fn greedy_cover_extension_with(c: &Corpus, base: &BTreeSet<TagId>, k: usize, exec: Execution) -> Vec<ExtensionStep> {
    let n_all = c.len();
    let twenty: Vec<bool> = c.games().iter().map(|g| g.tag_counts.len() == MAX_TAGS_PER_GAME).collect();
    let n_20 = twenty.iter().filter(|&&b| b).count();
    let mut games_of: BTreeMap<&TagId, Vec<usize>> = c.tags().iter().map(|t| (t, Vec::new())).collect();
    for (g, game) in c.games().iter().enumerate() {
        for t in game.tag_counts.keys() {
            games_of.get_mut(t).expect("registry closure").push(g);
        }
    }
    let mut covered: Vec<bool> = c.games().iter().map(|g| g.tag_counts.keys().any(|t| base.contains(t))).collect();
    let mut cov_all = covered.iter().filter(|&&b| b).count();
    let mut cov_20 = covered.iter().zip(&twenty).filter(|(&c, &t)| c && t).count();
    let mut candidates: Vec<(&TagId, &Vec<usize>)> = games_of.iter().filter(|(t, _)| !base.contains(**t)).map(|(t, g)| (*t, g)).collect();
    let mut steps = Vec::with_capacity(k);
    for _ in 0..k {
        if candidates.is_empty() {
            break;
        }
        let gains = exec::map_slice(exec, &candidates, |(_, games)| games.iter().filter(|&&g| !covered[g]).count());
        // Candidates are in name order, so the first maximum wins ties.
        let best = gains
            .iter()
            .enumerate()
            .fold(0, |best, (i, &gain)| if gain > gains[best] { i } else { best });
        let (tag, games) = candidates.remove(best);
        for &g in games {
            if !covered[g] {
                covered[g] = true;
                cov_all += 1;
                cov_20 += twenty[g] as usize;
            }
        }
        steps.push(ExtensionStep {
            tag: tag.clone(),
            newly_covered: gains[best],
            pct_all_games: pct(cov_all, n_all),
            pct_20tag_games: pct(cov_20, n_20),
        });
    }
    steps
}

/// Removes every edge `u -> w` for which another directed path from `u` to
/// `w` exists. Edges are examined in lexicographic order against the graph
/// as already reduced, so reachability is preserved even when cycles are
/// present; on acyclic graphs this is the unique transitive reduction.
pub fn transitive_reduce(g: &TagGraph) -> (TagGraph, Vec<OrientedEdge>) {
    let (names, mut dg) = g.to_digraph();
    let index: BTreeMap<&TagId, usize> = names.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut removed = Vec::new();
    let mut reduced = g.clone();
    for e in &g.edges {
        let (u, w) = (index[&e.from], index[&e.to]);
        if dg.reachable_from(u, Some((u, w)))[w] {
            dg.remove_edge(u, w);
            reduced.edges.remove(e);
            removed.push(e.clone());
        }
    }
    (reduced, removed)
}
