//! Synonym detection and decomposition into well-oriented groups.
//!
//! For a correlated pair the games carrying only A, only B, or both are
//! counted; whichever share dominates decides the edge. Mutual edges are
//! contracted, and every weak component is then split, by deleting as few
//! edges as possible, into parts that each have a unique vertex reachable
//! from all others. That vertex is the group's representative.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TagId;
use crate::exec::{self, Execution};
use crate::graph::Digraph;
use crate::meronomy::{transitive_reduce, CorrelatedPair, OrientedEdge, TagGraph};
use crate::priority::PriorityMatrix;
use crate::taxonomy::TaxonAssignment;

pub const DEFAULT_SYNONYM_LOCAL_MIN: f64 = -0.6;
pub const DEFAULT_EXACT_BUDGET: usize = 20;
/// Exact search packs vertex sets into a `u64`.
pub const EXACT_MAX_NODES: usize = 64;

/// Broad tags removed before synonym detection, on top of the capital tags.
pub const DEFAULT_SYNONYM_EXCLUDED: &[&str] = &["2D", "Shooter", "Puzzle", "Atmospheric", "Simulation", "Story Rich", "Fantasy"];

pub const DEFAULT_CROSS_TAXON_KEEP: &[(&str, &str)] = &[("Trading Card Game", "Card Game")];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynonymError {
    #[error("{edges} edges exceed the exact budget of {budget}; use the greedy solver")]
    OverBudget { edges: usize, budget: usize },
    #[error("{0} vertices exceed the exact solver limit of 64; use the greedy solver")]
    TooManyNodes(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub x_a: usize,
    pub x_b: usize,
    pub x_union: usize,
    pub x_inter: usize,
}

impl PairCounts {
    pub fn new(x_a: usize, x_b: usize, x_inter: usize) -> Self {
        PairCounts {
            x_a,
            x_b,
            x_inter,
            x_union: x_a + x_b + x_inter,
        }
    }

    pub fn from_matrix(m: &PriorityMatrix, a: usize, b: usize) -> Self {
        let (ca, cb) = (m.column(a), m.column(b));
        let (mut i, mut j, mut inter) = (0, 0, 0);
        while i < ca.len() && j < cb.len() {
            match ca[i].index.cmp(&cb[j].index) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        PairCounts::new(ca.len() - inter, cb.len() - inter, inter)
    }

    pub fn r_a(&self) -> f64 {
        self.x_a as f64 / self.x_union as f64
    }

    pub fn r_b(&self) -> f64 {
        self.x_b as f64 / self.x_union as f64
    }

    pub fn r_inter(&self) -> f64 {
        self.x_inter as f64 / self.x_union as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    AToB,
    BToA,
    Mutual,
}

/// The three ratios share a denominator, so counts are compared directly.
/// Ties go to mutual first; an `r_A = r_B` tie points at the smaller name.
pub fn classify_edge(pc: &PairCounts, a: &TagId, b: &TagId) -> EdgeKind {
    if pc.x_inter >= pc.x_a && pc.x_inter >= pc.x_b {
        EdgeKind::Mutual
    } else if pc.x_b > pc.x_a {
        EdgeKind::AToB
    } else if pc.x_a > pc.x_b || a < b {
        EdgeKind::BToA
    } else {
        EdgeKind::AToB
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SynonymEdge {
    /// Tail of a directed edge; for mutual edges the smaller name.
    pub from: TagId,
    pub to: TagId,
    pub mutual: bool,
    pub cross_taxon: bool,
    /// Original edges this one stands for after contraction; empty when it
    /// is itself original.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged_from: Vec<(TagId, TagId)>,
}

impl SynonymEdge {
    fn originals(&self) -> Vec<(TagId, TagId)> {
        if self.merged_from.is_empty() {
            vec![(self.from.clone(), self.to.clone())]
        } else {
            self.merged_from.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SynonymGraph {
    /// Occurrence count per node.
    pub nodes: BTreeMap<TagId, usize>,
    /// Sorted, at most one edge per ordered pair.
    pub edges: Vec<SynonymEdge>,
    /// Surviving label to the labels contracted into it.
    pub merged: BTreeMap<TagId, BTreeSet<TagId>>,
}

impl SynonymGraph {
    pub fn edge(&self, from: &str, to: &str) -> Option<&SynonymEdge> {
        self.edges.iter().find(|e| e.from.as_str() == from && e.to.as_str() == to)
    }

    fn normalize(&mut self) {
        self.edges.sort();
        self.edges.dedup_by(|a, b| a.from == b.from && a.to == b.to);
    }
}

pub fn default_excluded(capital: &BTreeSet<TagId>) -> BTreeSet<TagId> {
    capital.iter().cloned().chain(DEFAULT_SYNONYM_EXCLUDED.iter().map(|&t| TagId::from(t))).collect()
}

/// Keeps pairs with `local_r > local_min` and no excluded endpoint, and
/// classifies each. An edge is cross-taxon when both endpoints have a taxon
/// and the taxa differ.
pub fn build_synonym_graph(
    m: &PriorityMatrix,
    pairs: &[CorrelatedPair],
    local_min: f64,
    excluded: &BTreeSet<TagId>,
    ta: &TaxonAssignment,
) -> SynonymGraph {
    let mut g = SynonymGraph::default();
    for p in pairs {
        if !p.local_r.is_some_and(|r| r > local_min) || excluded.contains(&p.a) || excluded.contains(&p.b) {
            continue;
        }
        let (Some(ia), Some(ib)) = (m.tag_index(&p.a), m.tag_index(&p.b)) else {
            continue;
        };
        let kind = classify_edge(&PairCounts::from_matrix(m, ia, ib), &p.a, &p.b);
        let (from, to) = match kind {
            EdgeKind::AToB => (&p.a, &p.b),
            EdgeKind::BToA => (&p.b, &p.a),
            EdgeKind::Mutual => ((&p.a).min(&p.b), (&p.a).max(&p.b)),
        };
        let cross_taxon = matches!((ta.taxon(&p.a), ta.taxon(&p.b)), (Some(x), Some(y)) if x != y);
        g.nodes.insert(p.a.clone(), m.occurrence(ia));
        g.nodes.insert(p.b.clone(), m.occurrence(ib));
        g.edges.push(SynonymEdge {
            from: from.clone(),
            to: to.clone(),
            mutual: kind == EdgeKind::Mutual,
            cross_taxon,
            merged_from: Vec::new(),
        });
    }
    g.normalize();
    g
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Contracts every mutual edge. Each class keeps the label with the highest
/// occurrence (ties: smallest name); self-loops vanish and parallel edges
/// collapse into one that remembers all its originals.
pub fn merge_mutual(g: &SynonymGraph) -> SynonymGraph {
    let names: Vec<&TagId> = g.nodes.keys().collect();
    let index: BTreeMap<&TagId, usize> = names.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut parent: Vec<usize> = (0..names.len()).collect();
    for e in g.edges.iter().filter(|e| e.mutual) {
        let (a, b) = (find(&mut parent, index[&e.from]), find(&mut parent, index[&e.to]));
        parent[a.max(b)] = a.min(b);
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..names.len() {
        classes.entry(find(&mut parent, i)).or_default().push(i);
    }
    let mut label = vec![0usize; names.len()];
    let mut out = SynonymGraph::default();
    for members in classes.values() {
        // Members are in name order, so the first maximum is the smallest name.
        let best = *members.iter().reduce(|b, i| if g.nodes[names[*i]] > g.nodes[names[*b]] { i } else { b }).expect("classes are non-empty");
        let keep = names[best];
        out.nodes.insert(keep.clone(), g.nodes[keep]);
        let mut absorbed: BTreeSet<TagId> = g.merged.get(keep).cloned().unwrap_or_default();
        for &i in members {
            label[i] = best;
            if i != best {
                absorbed.insert(names[i].clone());
                absorbed.extend(g.merged.get(names[i]).into_iter().flatten().cloned());
            }
        }
        if !absorbed.is_empty() {
            out.merged.insert(keep.clone(), absorbed);
        }
    }
    let mut by_pair: BTreeMap<(usize, usize), SynonymEdge> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| !e.mutual) {
        let (u, v) = (label[index[&e.from]], label[index[&e.to]]);
        if u == v {
            log::info!("contraction turns {} -> {} into a self-loop; dropped", e.from, e.to);
            continue;
        }
        let entry = by_pair.entry((u, v)).or_insert_with(|| SynonymEdge {
            from: names[u].clone(),
            to: names[v].clone(),
            mutual: false,
            cross_taxon: false,
            merged_from: Vec::new(),
        });
        entry.cross_taxon |= e.cross_taxon;
        entry.merged_from.extend(e.originals());
    }
    for e in by_pair.values_mut() {
        e.merged_from.sort();
        e.merged_from.dedup();
        if e.merged_from == [(e.from.clone(), e.to.clone())] {
            e.merged_from.clear();
        }
    }
    out.edges = by_pair.into_values().collect();
    out.normalize();
    out
}

/// Index view of a directed graph; vertex `i` is the `i`-th name.
#[derive(Clone, Debug)]
struct Work {
    names: Vec<TagId>,
    occ: Vec<usize>,
    /// Sorted by (from, to); mutual edges appear in both directions.
    edges: Vec<(usize, usize)>,
    originals: Vec<Vec<(TagId, TagId)>>,
}

impl Work {
    fn from_graph(g: &SynonymGraph) -> Self {
        let names: Vec<TagId> = g.nodes.keys().cloned().collect();
        let occ = g.nodes.values().copied().collect();
        let index: BTreeMap<&TagId, usize> = names.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut edges = Vec::new();
        for e in &g.edges {
            let (u, v) = (index[&e.from], index[&e.to]);
            edges.push(((u, v), e.originals()));
            if e.mutual {
                edges.push(((v, u), vec![(e.to.clone(), e.from.clone())]));
            }
        }
        edges.sort();
        edges.dedup_by(|a, b| a.0 == b.0);
        let (edges, originals) = edges.into_iter().unzip();
        Work { names, occ, edges, originals }
    }

    fn digraph(&self, keep: impl Fn(usize) -> bool) -> Digraph {
        let mut g = Digraph::new(self.names.len());
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if keep(i) {
                g.add_edge(u, v);
            }
        }
        g
    }
}

/// Vertices reachable from every other vertex of `members` in `g`.
fn sink_set(g: &Digraph, members: &[usize]) -> Vec<usize> {
    let mut count = vec![0usize; g.len()];
    for &u in members {
        for (v, r) in g.reachable_from(u, None).into_iter().enumerate() {
            count[v] += r as usize;
        }
    }
    members.iter().copied().filter(|&v| count[v] == members.len()).collect()
}

/// Returns whether the graph (taken as one component) has exactly one
/// vertex reachable from all others, plus the candidate set.
pub fn is_well_oriented(g: &SynonymGraph) -> (bool, Vec<TagId>) {
    let w = Work::from_graph(g);
    let dg = w.digraph(|_| true);
    let all: Vec<usize> = (0..w.names.len()).collect();
    let s: Vec<TagId> = sink_set(&dg, &all).into_iter().map(|i| w.names[i].clone()).collect();
    (s.len() == 1, s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymGroup {
    /// Sorted; includes labels absorbed by mutual contraction.
    pub members: Vec<TagId>,
    pub representative: TagId,
    /// Original edges removed to make the group well-oriented, attributed to
    /// the group of their tail.
    pub deleted_edges: Vec<(TagId, TagId)>,
    pub exact: bool,
    /// Remaining edges between surviving labels.
    #[serde(skip)]
    pub edges: Vec<(TagId, TagId)>,
}

/// Turns a feasible residual (the edges not in `deleted`) into groups.
fn emit_groups(w: &Work, g: &SynonymGraph, deleted: &[usize], exact: bool) -> Vec<SynonymGroup> {
    let removed: BTreeSet<usize> = deleted.iter().copied().collect();
    let dg = w.digraph(|i| !removed.contains(&i));
    let comps = dg.weak_components();
    let mut comp_of = vec![0; w.names.len()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut groups: Vec<SynonymGroup> = comps
        .iter()
        .map(|members| {
            let sinks = sink_set(&dg, members);
            debug_assert_eq!(sinks.len(), 1, "residual component is not well-oriented");
            let mut names: BTreeSet<TagId> = BTreeSet::new();
            for &v in members {
                names.insert(w.names[v].clone());
                names.extend(g.merged.get(&w.names[v]).into_iter().flatten().cloned());
            }
            let edges = dg
                .edges()
                .into_iter()
                .filter(|&(u, _)| members.binary_search(&u).is_ok())
                .map(|(u, v)| (w.names[u].clone(), w.names[v].clone()))
                .collect();
            SynonymGroup {
                members: names.into_iter().collect(),
                representative: w.names[sinks[0]].clone(),
                deleted_edges: Vec::new(),
                exact,
                edges,
            }
        })
        .collect();
    for &i in &removed {
        let (u, _) = w.edges[i];
        groups[comp_of[u]].deleted_edges.extend(w.originals[i].iter().cloned());
    }
    for grp in &mut groups {
        grp.deleted_edges.sort();
    }
    groups
}

fn n_choose_k(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        loop {
            let rest = n_choose_k(n - next - 1, k - slot - 1);
            if rank < rest {
                break;
            }
            rank -= rest;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

/// Bitmask feasibility check for graphs with at most 64 vertices.
struct MaskCheck {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl MaskCheck {
    fn feasible(&self, deleted: &[usize]) -> bool {
        let mut out = vec![0u64; self.n];
        let mut undirected = vec![0u64; self.n];
        let mut d = deleted.iter().peekable();
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if d.peek() == Some(&&i) {
                d.next();
                continue;
            }
            out[u] |= 1 << v;
            undirected[u] |= 1 << v;
            undirected[v] |= 1 << u;
        }
        let mut reach = vec![0u64; self.n];
        for (s, r) in reach.iter_mut().enumerate() {
            let (mut seen, mut frontier) = (1u64 << s, 1u64 << s);
            while frontier != 0 {
                let u = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                let new = out[u] & !seen;
                seen |= new;
                frontier |= new;
            }
            *r = seen;
        }
        let mut unseen: u64 = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        while unseen != 0 {
            let s = unseen.trailing_zeros() as usize;
            let (mut comp, mut frontier) = (1u64 << s, 1u64 << s);
            while frontier != 0 {
                let u = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                let new = undirected[u] & !comp;
                comp |= new;
                frontier |= new;
            }
            unseen &= !comp;
            let mut common = comp;
            let mut rest = comp;
            while rest != 0 {
                let u = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                common &= reach[u];
            }
            if common.count_ones() != 1 {
                return false;
            }
        }
        true
    }
}

pub fn min_deletion_exact(g: &SynonymGraph, max_edges: usize) -> Result<Vec<SynonymGroup>, SynonymError> {
    min_deletion_exact_with(g, max_edges, Execution::default())
}

/// Smallest edge set whose removal leaves only well-oriented components.
/// Sets are tried by increasing size, each size in lexicographic order of
/// edge indices (edges sorted by tail name, then head name); the first
/// feasible set wins, independent of scheduling.
pub fn min_deletion_exact_with(g: &SynonymGraph, max_edges: usize, exec: Execution) -> Result<Vec<SynonymGroup>, SynonymError> {
    let w = Work::from_graph(g);
    let m = w.edges.len();
    if m > max_edges {
        return Err(SynonymError::OverBudget { edges: m, budget: max_edges });
    }
    if w.names.len() > EXACT_MAX_NODES {
        return Err(SynonymError::TooManyNodes(w.names.len()));
    }
    let check = MaskCheck {
        n: w.names.len(),
        edges: w.edges.clone(),
    };
    for k in 0..=m {
        let total = n_choose_k(m, k);
        if let Some(rank) = exec::find_first_index(exec, total, |r| check.feasible(&unrank_combination(m, k, r))) {
            return Ok(emit_groups(&w, g, &unrank_combination(m, k, rank), true));
        }
    }
    unreachable!("deleting every edge is always feasible")
}

/// Repeatedly detaches a well-oriented part from each component that is not
/// yet well-oriented. For every vertex `v` in a sink strongly connected
/// component, the part is `v` plus everything reaching it; the cost is the
/// out-edges of `v` plus the edges leaving the part. The cheapest candidate
/// wins (ties: larger part, higher occurrence, smaller name).
pub fn min_deletion_greedy(g: &SynonymGraph) -> Vec<SynonymGroup> {
    let w = Work::from_graph(g);
    let mut alive = vec![true; w.edges.len()];
    let mut pending = w.digraph(|_| true).weak_components();
    while let Some(members) = pending.pop() {
        let dg = w.digraph(|i| alive[i]);
        if sink_set(&dg, &members).len() == 1 {
            continue;
        }
        let closure: BTreeMap<usize, Vec<bool>> = members.iter().map(|&u| (u, dg.reachable_from(u, None))).collect();
        let reaches = |u: usize, v: usize| closure[&u][v];
        let mut best: Option<(usize, usize, BTreeSet<usize>)> = None;
        for &v in &members {
            let in_sink_scc = members.iter().all(|&x| !reaches(v, x) || reaches(x, v));
            if !in_sink_scc {
                continue;
            }
            let part: BTreeSet<usize> = members.iter().copied().filter(|&u| reaches(u, v)).collect();
            let cost = w
                .edges
                .iter()
                .enumerate()
                .filter(|&(i, &(a, b))| alive[i] && part.contains(&a) && (a == v || !part.contains(&b)))
                .count();
            let better = match &best {
                None => true,
                Some((bc, bv, bp)) => (cost, std::cmp::Reverse(part.len()), std::cmp::Reverse(w.occ[v]), v) < (*bc, std::cmp::Reverse(bp.len()), std::cmp::Reverse(w.occ[*bv]), *bv),
            };
            if better {
                best = Some((cost, v, part));
            }
        }
        let (_, v, part) = best.expect("every finite digraph has a sink component");
        for (i, &(a, b)) in w.edges.iter().enumerate() {
            if alive[i] && part.contains(&a) && (a == v || !part.contains(&b)) {
                alive[i] = false;
            }
        }
        let dg = w.digraph(|i| alive[i]);
        let rest: BTreeSet<usize> = members.iter().copied().filter(|u| !part.contains(u)).collect();
        for comp in dg.weak_components() {
            if rest.contains(&comp[0]) {
                pending.push(comp);
            }
        }
    }
    let deleted: Vec<usize> = (0..w.edges.len()).filter(|&i| !alive[i]).collect();
    emit_groups(&w, g, &deleted, false)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynonymOptions {
    pub exact_budget: usize,
    /// Cross-taxon edges kept despite the taxon mismatch, as (from, to).
    pub cross_taxon_keep: BTreeSet<(TagId, TagId)>,
}

impl Default for SynonymOptions {
    fn default() -> Self {
        SynonymOptions {
            exact_budget: DEFAULT_EXACT_BUDGET,
            cross_taxon_keep: DEFAULT_CROSS_TAXON_KEEP.iter().map(|&(a, b)| (a.into(), b.into())).collect(),
        }
    }
}

pub fn synonym_groups(g: &SynonymGraph, exact_budget: usize) -> Vec<SynonymGroup> {
    let opts = SynonymOptions {
        exact_budget,
        ..SynonymOptions::default()
    };
    synonym_groups_with(g, &opts, Execution::default())
}

/// Full decomposition: drop cross-taxon edges not on the keep list, merge
/// mutual edges, solve each weak component (exactly when within budget),
/// then strip redundant edges inside each group. Groups are ordered by
/// smallest member.
pub fn synonym_groups_with(g: &SynonymGraph, opts: &SynonymOptions, exec: Execution) -> Vec<SynonymGroup> {
    let mut filtered = g.clone();
    filtered.edges.retain(|e| {
        !e.cross_taxon
            || opts.cross_taxon_keep.contains(&(e.from.clone(), e.to.clone()))
            || (e.mutual && opts.cross_taxon_keep.contains(&(e.to.clone(), e.from.clone())))
    });
    let merged = merge_mutual(&filtered);
    let w = Work::from_graph(&merged);
    let comps = w.digraph(|_| true).weak_components();
    let parts: Vec<SynonymGraph> = comps
        .iter()
        .map(|members| {
            let names: BTreeSet<&TagId> = members.iter().map(|&v| &w.names[v]).collect();
            SynonymGraph {
                nodes: merged.nodes.iter().filter(|(t, _)| names.contains(t)).map(|(t, &o)| (t.clone(), o)).collect(),
                edges: merged.edges.iter().filter(|e| names.contains(&e.from)).cloned().collect(),
                merged: merged.merged.iter().filter(|(t, _)| names.contains(t)).map(|(t, s)| (t.clone(), s.clone())).collect(),
            }
        })
        .collect();
    let solved = exec::map_slice(exec, &parts, |part| {
        let n_edges = part.edges.len();
        if n_edges <= opts.exact_budget && part.nodes.len() <= EXACT_MAX_NODES {
            min_deletion_exact_with(part, opts.exact_budget, Execution::Sequential).expect("within budget")
        } else {
            log::info!("component with {n_edges} edges exceeds the exact budget; using greedy");
            min_deletion_greedy(part)
        }
    });
    let mut groups: Vec<SynonymGroup> = solved.into_iter().flatten().map(reduce_group).collect();
    groups.sort_by(|a, b| a.members.first().cmp(&b.members.first()));
    groups
}

fn reduce_group(mut grp: SynonymGroup) -> SynonymGroup {
    let mut tg = TagGraph::default();
    for (a, b) in &grp.edges {
        tg.nodes.insert(a.clone(), 0);
        tg.nodes.insert(b.clone(), 0);
        tg.edges.insert(OrientedEdge {
            from: a.clone(),
            to: b.clone(),
            tie: false,
        });
    }
    let (reduced, _) = transitive_reduce(&tg);
    grp.edges = reduced.edges.into_iter().map(|e| (e.from, e.to)).collect();
    grp
}
