//! Finite graphs as reflexive symmetric relations.
//!
//! Loops are never stored: every vertex is adjacent to itself, and the stored edge list only
//! holds unordered pairs `{a, b}` with `a < b`. Canonical forms are computed by brute force over
//! relabelings (with branch-and-bound pruning), so they are capped at a small vertex count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap for canonicalization and enumeration.
pub const DEFAULT_CANON_CAP: usize = 8;

pub type Vertex = usize;

/// A finite graph on vertices `0..n` with an implicit loop at every vertex.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct FiniteGraph {
    n: usize,
    edges: Vec<(Vertex, Vertex)>,
    adj: Vec<Vec<Vertex>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for FiniteGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        FiniteGraph::new(r.n, r.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<FiniteGraph> for GraphRepr {
    fn from(g: FiniteGraph) -> Self {
        GraphRepr { n: g.n, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl PartialEq for FiniteGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl Eq for FiniteGraph {}

impl std::hash::Hash for FiniteGraph {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.n.hash(state);
        self.edges.hash(state);
    }
}

impl fmt::Debug for FiniteGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGraph(n={}, edges={:?})", self.n, self.edges)
    }
}

impl FiniteGraph {
    /// Builds a graph from arbitrary pairs; loops are dropped and pairs deduplicated.
    pub fn new<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            for v in [a, b] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Self::from_sorted(n, set.into_iter().collect()))
    }

    /// `edges` must be strictly increasing pairs `a < b < n`.
    pub(crate) fn from_sorted(n: usize, edges: Vec<(Vertex, Vertex)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        FiniteGraph { n, edges, adj }
    }

    /// Collects edges from an iterator of in-range pairs without the `Result` plumbing.
    pub(crate) fn from_pairs_unchecked<I>(n: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        let mut edges: Vec<_> = pairs.into_iter().filter(|&(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        edges.dedup();
        Self::from_sorted(n, edges)
    }

    pub fn discrete(n: usize) -> Result<Self> {
        Self::new(n, [])
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|v| (v - 1, v)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n)))
    }

    /// The 1-vertex graph.
    pub fn singleton() -> Self {
        Self::from_sorted(1, Vec::new())
    }

    /// Two adjacent vertices.
    pub fn single_edge() -> Self {
        Self::from_sorted(2, vec![(0, 1)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> std::ops::Range<Vertex> {
        0..self.n
    }

    /// Stored (non-loop) edges, sorted, each with `a < b`.
    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    /// Non-loop neighbours of `v`, sorted.
    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v].len()
    }

    /// The semantic relation: reflexive and symmetric.
    pub fn adjacent(&self, a: Vertex, b: Vertex) -> bool {
        a == b || self.adj[a].binary_search(&b).is_ok()
    }

    /// Relabels along `perm`, where `perm[v]` is the new id of `v`.
    pub fn permute(&self, perm: &[Vertex]) -> FiniteGraph {
        assert_eq!(perm.len(), self.n, "permutation length");
        Self::from_pairs_unchecked(self.n, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }

    /// Vertices adjacent to themselves only.
    pub fn isolated_vertices(&self) -> BTreeSet<Vertex> {
        self.vertices().filter(|&v| self.adj[v].is_empty()).collect()
    }

    /// Restricts the relation to `subset`. Returns the subgraph together with `old_ids`, where
    /// `old_ids[i]` is the vertex of `self` renumbered to `i`.
    pub fn induced_subgraph(&self, subset: &BTreeSet<Vertex>) -> Result<(FiniteGraph, Vec<Vertex>)> {
        if subset.is_empty() {
            return Err(Error::EmptyVertexSet);
        }
        if let Some(&v) = subset.iter().find(|&&v| v >= self.n) {
            return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
        }
        let old_ids: Vec<Vertex> = subset.iter().copied().collect();
        let mut new_id = vec![usize::MAX; self.n];
        for (i, &v) in old_ids.iter().enumerate() {
            new_id[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| new_id[a] != usize::MAX && new_id[b] != usize::MAX)
            .map(|&(a, b)| (new_id[a], new_id[b]))
            .collect::<Vec<_>>();
        // renumbering is monotone, so the list stays sorted
        Ok((Self::from_sorted(old_ids.len(), edges), old_ids))
    }

    /// Connected components (through non-loop edges), each sorted, ordered by least vertex.
    pub fn components(&self) -> Vec<Vec<Vertex>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut out: Vec<Vec<Vertex>> = Vec::new();
        for start in self.vertices() {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            comp[start] = id;
            let mut members = Vec::new();
            while let Some(v) = stack.pop() {
                members.push(v);
                for &w in &self.adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Canonical code under the default cap.
    pub fn canonical_form(&self) -> Result<CanonicalCode> {
        canonical_form_capped(self, DEFAULT_CANON_CAP)
    }
}

/// Upper triangle of the adjacency matrix of the least relabeling, read column by column:
/// `(0,1), (0,2), (1,2), (0,3), ...`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalCode {
    pub n: usize,
    pub bits: String,
}

impl CanonicalCode {
    /// Rebuilds the canonical representative.
    pub fn to_graph(&self) -> FiniteGraph {
        let bits = self.bits.as_bytes();
        let mut idx = 0;
        let mut edges = Vec::new();
        for j in 1..self.n {
            for i in 0..j {
                if bits[idx] == b'1' {
                    edges.push((i, j));
                }
                idx += 1;
            }
        }
        FiniteGraph::from_pairs_unchecked(self.n, edges)
    }
}

struct CanonSearch<'a> {
    g: &'a FiniteGraph,
    placed: Vec<Vertex>,
    used: Vec<bool>,
    bits: Vec<bool>,
    best: Option<(Vec<bool>, Vec<Vertex>)>,
}

impl CanonSearch<'_> {
    // `tight` means the current prefix equals the best code's prefix so far.
    fn run(&mut self, tight: bool) {
        let k = self.placed.len();
        if k == self.g.n {
            let better = match &self.best {
                None => true,
                Some((b, _)) => self.bits < *b,
            };
            if better {
                self.best = Some((self.bits.clone(), self.placed.clone()));
            }
            return;
        }
        for v in self.g.vertices() {
            if self.used[v] {
                continue;
            }
            let start = self.bits.len();
            for i in 0..k {
                let bit = self.g.adjacent(self.placed[i], v);
                self.bits.push(bit);
            }
            let mut next_tight = tight;
            let mut prune = false;
            if tight {
                if let Some((best, _)) = &self.best {
                    match self.bits[start..].cmp(&best[start..start + k]) {
                        std::cmp::Ordering::Greater => prune = true,
                        std::cmp::Ordering::Less => next_tight = false,
                        std::cmp::Ordering::Equal => {}
                    }
                } else {
                    next_tight = false;
                }
            }
            if !prune {
                self.used[v] = true;
                self.placed.push(v);
                self.run(next_tight);
                self.placed.pop();
                self.used[v] = false;
            }
            self.bits.truncate(start);
        }
    }
}

/// Returns the canonical code and the permutation (`perm[v]` = canonical id of `v`).
pub fn canonical_labeling(g: &FiniteGraph, cap: usize) -> Result<(CanonicalCode, Vec<Vertex>)> {
    if g.n > cap {
        return Err(Error::CapExceeded { what: "canonical form", n: g.n, cap });
    }
    let mut search =
        CanonSearch { g, placed: Vec::with_capacity(g.n), used: vec![false; g.n], bits: Vec::new(), best: None };
    search.run(true);
    let (bits, placed) = search.best.expect("at least one relabeling");
    let mut perm = vec![0; g.n];
    for (i, &v) in placed.iter().enumerate() {
        perm[v] = i;
    }
    let bits = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    Ok((CanonicalCode { n: g.n, bits }, perm))
}

pub fn canonical_form_capped(g: &FiniteGraph, cap: usize) -> Result<CanonicalCode> {
    canonical_labeling(g, cap).map(|(c, _)| c)
}

pub fn are_isomorphic(g: &FiniteGraph, h: &FiniteGraph) -> Result<bool> {
    if g.n != h.n || g.edges.len() != h.edges.len() {
        return Ok(false);
    }
    let mut dg: Vec<_> = g.vertices().map(|v| g.degree(v)).collect();
    let mut dh: Vec<_> = h.vertices().map(|v| h.degree(v)).collect();
    dg.sort_unstable();
    dh.sort_unstable();
    if dg != dh {
        return Ok(false);
    }
    Ok(g.canonical_form()? == h.canonical_form()?)
}

/// One canonical representative per isomorphism class on `n` vertices, ascending by code.
pub fn enumerate_graphs(n: usize) -> Result<Vec<FiniteGraph>> {
    enumerate_graphs_capped(n, DEFAULT_CANON_CAP)
}

pub fn enumerate_graphs_capped(n: usize, cap: usize) -> Result<Vec<FiniteGraph>> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n > cap {
        return Err(Error::CapExceeded { what: "graph enumeration", n, cap });
    }
    let mut reps = vec![FiniteGraph::singleton()];
    for m in 2..=n {
        let mut classes: BTreeMap<CanonicalCode, ()> = BTreeMap::new();
        for g in &reps {
            for mask in 0u32..(1 << (m - 1)) {
                let pairs =
                    g.edges.iter().copied().chain((0..m - 1).filter(|&v| mask & (1 << v) != 0).map(|v| (v, m - 1)));
                let h = FiniteGraph::from_pairs_unchecked(m, pairs);
                classes.insert(canonical_form_capped(&h, cap)?, ());
            }
        }
        reps = classes.keys().map(CanonicalCode::to_graph).collect();
    }
    Ok(reps)
}
