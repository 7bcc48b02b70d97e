//! Index-based directed graph helpers shared by the meronomy and synonymy
//! stages.

use std::collections::VecDeque;

/// Directed graph over `0..n` with at most one edge per ordered pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Digraph {
    out: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { out: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Digraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    /// Adds `u -> v`; returns false if it was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> bool {
        if self.out[u].contains(&v) {
            return false;
        }
        self.out[u].push(v);
        true
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        let before = self.out[u].len();
        self.out[u].retain(|&w| w != v);
        before != self.out[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].contains(&v)
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.out[u]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .out
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Vertices reachable from `start` (including itself), optionally
    /// ignoring one edge.
    pub fn reachable_from(&self, start: usize, skip: Option<(usize, usize)>) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.out[u] {
                if skip == Some((u, v)) || seen[v] {
                    continue;
                }
                seen[v] = true;
                queue.push_back(v);
            }
        }
        seen
    }

    /// Full reachability matrix; `closure[u][v]` iff a path `u -> ... -> v`
    /// exists (every vertex reaches itself).
    pub fn closure(&self) -> Vec<Vec<bool>> {
        (0..self.len()).map(|u| self.reachable_from(u, None)).collect()
    }

    /// Weakly connected components, each sorted, ordered by smallest vertex.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (u, v) in self.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut i = 0;
            while i < members.len() {
                let u = members[i];
                i += 1;
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}
