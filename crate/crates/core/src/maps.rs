//! Vertex maps between finite graphs and their classification.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, Vertex};
use crate::search::QuotientSearch;

/// Default cap on the domain size for exhaustive quotient enumeration.
pub const DEFAULT_ENUM_CAP: usize = 8;

/// A total vertex assignment `dom -> cod`. Properties are always computed, never stored.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MapRepr", into = "MapRepr")]
pub struct GraphMap {
    dom: Arc<FiniteGraph>,
    cod: Arc<FiniteGraph>,
    assign: Vec<Vertex>,
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    dom: FiniteGraph,
    cod: FiniteGraph,
    assign: Vec<Vertex>,
}

impl TryFrom<MapRepr> for GraphMap {
    type Error = Error;

    fn try_from(r: MapRepr) -> Result<Self> {
        GraphMap::new(Arc::new(r.dom), Arc::new(r.cod), r.assign)
    }
}

impl From<GraphMap> for MapRepr {
    fn from(m: GraphMap) -> Self {
        MapRepr { dom: (*m.dom).clone(), cod: (*m.cod).clone(), assign: m.assign }
    }
}

impl fmt::Debug for GraphMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GraphMap({} -> {}, {:?})", self.dom.n(), self.cod.n(), self.assign)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub homomorphism: bool,
    pub strict: bool,
    pub surjective: bool,
    pub injective: bool,
    pub embedding: bool,
    pub quotient: bool,
}

fn same_graph(a: &Arc<FiniteGraph>, b: &Arc<FiniteGraph>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl GraphMap {
    pub fn new(dom: Arc<FiniteGraph>, cod: Arc<FiniteGraph>, assign: Vec<Vertex>) -> Result<Self> {
        if assign.len() != dom.n() {
            return Err(Error::BadAssignment { dom: dom.n(), len: assign.len() });
        }
        if let Some(&v) = assign.iter().find(|&&v| v >= cod.n()) {
            return Err(Error::VertexOutOfRange { vertex: v, n: cod.n() });
        }
        Ok(GraphMap { dom, cod, assign })
    }

    pub(crate) fn new_unchecked(dom: Arc<FiniteGraph>, cod: Arc<FiniteGraph>, assign: Vec<Vertex>) -> Self {
        debug_assert_eq!(assign.len(), dom.n());
        debug_assert!(assign.iter().all(|&v| v < cod.n()));
        GraphMap { dom, cod, assign }
    }

    pub fn identity(g: Arc<FiniteGraph>) -> Self {
        let assign = g.vertices().collect();
        GraphMap { dom: g.clone(), cod: g, assign }
    }

    pub fn constant(dom: Arc<FiniteGraph>, cod: Arc<FiniteGraph>, value: Vertex) -> Result<Self> {
        let assign = vec![value; dom.n()];
        Self::new(dom, cod, assign)
    }

    pub fn dom(&self) -> &Arc<FiniteGraph> {
        &self.dom
    }

    pub fn cod(&self) -> &Arc<FiniteGraph> {
        &self.cod
    }

    pub fn assign(&self) -> &[Vertex] {
        &self.assign
    }

    pub fn apply(&self, v: Vertex) -> Vertex {
        self.assign[v]
    }

    /// Fibre over `y`, sorted.
    pub fn preimage(&self, y: Vertex) -> Vec<Vertex> {
        self.dom.vertices().filter(|&v| self.assign[v] == y).collect()
    }

    pub fn image(&self) -> BTreeSet<Vertex> {
        self.assign.iter().copied().collect()
    }

    pub fn is_homomorphism(&self) -> bool {
        self.dom.edges().iter().all(|&(a, b)| self.cod.adjacent(self.assign[a], self.assign[b]))
    }

    /// Every edge between two range vertices is the image of an edge.
    pub fn is_strict(&self) -> bool {
        let range = self.image();
        let mut hit: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
        for &(a, b) in self.dom.edges() {
            let (p, q) = (self.assign[a], self.assign[b]);
            if p != q {
                hit.insert((p.min(q), p.max(q)));
            }
        }
        self.cod.edges().iter().filter(|(p, q)| range.contains(p) && range.contains(q)).all(|e| hit.contains(e))
    }

    pub fn is_surjective(&self) -> bool {
        self.image().len() == self.cod.n()
    }

    pub fn is_injective(&self) -> bool {
        self.image().len() == self.dom.n()
    }

    pub fn classify(&self) -> Classification {
        let homomorphism = self.is_homomorphism();
        let strict = self.is_strict();
        let surjective = self.is_surjective();
        let injective = self.is_injective();
        // injective + strict means adjacency is reflected
        let embedding = injective && homomorphism && strict;
        Classification {
            homomorphism,
            strict,
            surjective,
            injective,
            embedding,
            quotient: homomorphism && strict && surjective,
        }
    }

    pub fn is_quotient(&self) -> bool {
        self.is_surjective() && self.is_homomorphism() && self.is_strict()
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &GraphMap) -> Result<GraphMap> {
        compose(self, inner)
    }

    /// Inverse of a bijection.
    pub fn inverse(&self) -> Option<GraphMap> {
        if self.dom.n() != self.cod.n() || !self.is_injective() {
            return None;
        }
        let mut inv = vec![0; self.cod.n()];
        for (v, &w) in self.assign.iter().enumerate() {
            inv[w] = v;
        }
        Some(GraphMap::new_unchecked(self.cod.clone(), self.dom.clone(), inv))
    }
}

/// Pointwise composite `outer ∘ inner`.
pub fn compose(outer: &GraphMap, inner: &GraphMap) -> Result<GraphMap> {
    if !same_graph(&inner.cod, &outer.dom) {
        return Err(Error::CompositionMismatch);
    }
    let assign = inner.assign.iter().map(|&v| outer.assign[v]).collect();
    let out = GraphMap::new_unchecked(inner.dom.clone(), outer.cod.clone(), assign);
    debug_assert!(!(outer.is_quotient() && inner.is_quotient()) || out.is_quotient());
    Ok(out)
}

pub fn enumerate_quotients(x: &Arc<FiniteGraph>, y: &Arc<FiniteGraph>) -> Result<Vec<GraphMap>> {
    enumerate_quotients_capped(x, y, DEFAULT_ENUM_CAP)
}

/// All quotients `x -> y` in lexicographic assignment order.
pub fn enumerate_quotients_capped(x: &Arc<FiniteGraph>, y: &Arc<FiniteGraph>, cap: usize) -> Result<Vec<GraphMap>> {
    if x.n() > cap {
        return Err(Error::CapExceeded { what: "quotient enumeration", n: x.n(), cap });
    }
    Ok(QuotientSearch::unrestricted(x, y)?
        .all()
        .into_iter()
        .map(|a| GraphMap::new_unchecked(x.clone(), y.clone(), a))
        .collect())
}

/// Identifies `a` and `b`. The surviving vertex is `min(a, b)`; vertices above `max(a, b)`
/// shift down by one.
pub fn merge_vertices(g: &Arc<FiniteGraph>, a: Vertex, b: Vertex) -> Result<(Arc<FiniteGraph>, GraphMap)> {
    if a == b {
        return Err(Error::SelfMerge(a));
    }
    for v in [a, b] {
        if v >= g.n() {
            return Err(Error::VertexOutOfRange { vertex: v, n: g.n() });
        }
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let assign: Vec<Vertex> = g
        .vertices()
        .map(|v| match v.cmp(&hi) {
            std::cmp::Ordering::Less => v,
            std::cmp::Ordering::Equal => lo,
            std::cmp::Ordering::Greater => v - 1,
        })
        .collect();
    let merged =
        Arc::new(FiniteGraph::from_pairs_unchecked(g.n() - 1, g.edges().iter().map(|&(x, y)| (assign[x], assign[y]))));
    let map = GraphMap::new_unchecked(g.clone(), merged.clone(), assign);
    debug_assert!(map.is_quotient());
    Ok((merged, map))
}

/// A quotient written as single merges followed by an isomorphism onto the original codomain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub merges: Vec<GraphMap>,
    pub residual: GraphMap,
}

impl Decomposition {
    pub fn recompose(&self) -> GraphMap {
        let mut acc =
            GraphMap::identity(self.merges.first().map(|m| m.dom.clone()).unwrap_or_else(|| self.residual.dom.clone()));
        for m in &self.merges {
            acc = compose(m, &acc).expect("merge chain is composable");
        }
        compose(&self.residual, &acc).expect("residual matches the chain")
    }
}

/// Factors a quotient into single-vertex merges, always merging the lexicographically least
/// pair of vertices with equal image.
pub fn elementary_decompose(q: &GraphMap) -> Result<Decomposition> {
    if !q.is_quotient() {
        return Err(Error::NotQuotient("elementary_decompose"));
    }
    let mut current = q.dom.clone();
    let mut rest: Vec<Vertex> = q.assign.clone();
    let mut merges = Vec::new();
    loop {
        let pair =
            (0..current.n()).flat_map(|a| (a + 1..current.n()).map(move |b| (a, b))).find(|&(a, b)| rest[a] == rest[b]);
        let Some((a, b)) = pair else { break };
        let (next, m) = merge_vertices(&current, a, b)?;
        let mut next_rest = vec![0; next.n()];
        for v in current.vertices() {
            next_rest[m.apply(v)] = rest[v];
        }
        merges.push(m);
        current = next;
        rest = next_rest;
    }
    let residual = GraphMap::new_unchecked(current, q.cod.clone(), rest);
    debug_assert!(residual.is_quotient() && residual.is_injective());
    Ok(Decomposition { merges, residual })
}

/// Fibre sizes recognise a single merge: exactly one fibre of size two, the rest singletons.
pub fn merge_point(f: &GraphMap) -> Option<(Vertex, Vertex, Vertex)> {
    if f.dom.n() != f.cod.n() + 1 || !f.is_quotient() {
        return None;
    }
    f.cod.vertices().find_map(|x| match f.preimage(x).as_slice() {
        [y0, y1] => Some((x, *y0, *y1)),
        _ => None,
    })
}
