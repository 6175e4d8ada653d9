//! Finite-level views of the inverse limit of a built sequence.
//!
//! A [`Clopen`] is a set of vertices at one level and stands for its preimage in the limit.
//! Edges of the limit are only ever approximated from one side: a pair is refuted at the first
//! level where no representatives are adjacent, and otherwise left unrefuted up to the depth
//! searched.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::category::ProfiniteBase;
use crate::error::{Error, Result};
use crate::fraisse::{BuildReport, CommaData};
use crate::graph::{FiniteGraph, Vertex};
use crate::maps::GraphMap;
use crate::solve::Factorisation;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clopen {
    pub level: usize,
    pub members: BTreeSet<Vertex>,
}

impl Clopen {
    pub fn new(seq: &ProfiniteBase, level: usize, members: impl IntoIterator<Item = Vertex>) -> Result<Self> {
        seq.check_level(level)?;
        let n = seq.level(level).n();
        let members: BTreeSet<Vertex> = members.into_iter().collect();
        if let Some(&v) = members.iter().find(|&&v| v >= n) {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
        Ok(Clopen { level, members })
    }

    pub fn cylinder(seq: &ProfiniteBase, level: usize, v: Vertex) -> Result<Self> {
        Self::new(seq, level, [v])
    }

    pub fn full(seq: &ProfiniteBase, level: usize) -> Result<Self> {
        seq.check_level(level)?;
        Ok(Clopen { level, members: seq.level(level).vertices().collect() })
    }

    pub fn empty(level: usize) -> Self {
        Clopen { level, members: BTreeSet::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn complement(&self, seq: &ProfiniteBase) -> Clopen {
        Clopen {
            level: self.level,
            members: seq.level(self.level).vertices().filter(|v| !self.members.contains(v)).collect(),
        }
    }

    /// Whether the vertex `w` of level `m ≥ level` lies in this set.
    pub fn contains(&self, seq: &ProfiniteBase, m: usize, w: Vertex) -> bool {
        m >= self.level && self.members.contains(&seq.project(m, self.level, w))
    }

    pub fn intersect(&self, seq: &ProfiniteBase, other: &Clopen) -> Result<Clopen> {
        let m = self.level.max(other.level);
        let a = refine(seq, self, m)?;
        let b = refine(seq, other, m)?;
        Ok(Clopen { level: m, members: a.members.intersection(&b.members).copied().collect() })
    }

    pub fn union(&self, seq: &ProfiniteBase, other: &Clopen) -> Result<Clopen> {
        let m = self.level.max(other.level);
        let a = refine(seq, self, m)?;
        let b = refine(seq, other, m)?;
        Ok(Clopen { level: m, members: a.members.union(&b.members).copied().collect() })
    }

    pub fn difference(&self, seq: &ProfiniteBase, other: &Clopen) -> Result<Clopen> {
        let m = self.level.max(other.level);
        let a = refine(seq, self, m)?;
        let b = refine(seq, other, m)?;
        Ok(Clopen { level: m, members: a.members.difference(&b.members).copied().collect() })
    }
}

/// The same set described at the deeper level `m`.
pub fn refine(seq: &ProfiniteBase, c: &Clopen, m: usize) -> Result<Clopen> {
    seq.check_level(m)?;
    if m < c.level {
        return Err(Error::LevelOutOfRange { level: m, len: c.level });
    }
    let members = seq.level(m).vertices().filter(|&w| c.contains(seq, m, w)).collect();
    Ok(Clopen { level: m, members })
}

/// An adjacent pair at level `level`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeWitness {
    pub level: usize,
    pub pair: (Vertex, Vertex),
}

/// One-sided test for an edge between two cylinders of the limit: `false` means some level up
/// to `depth` has no adjacent pair of representatives.
pub fn edge_possible(seq: &ProfiniteBase, x: &Clopen, y: &Clopen, depth: usize) -> Result<bool> {
    let start = x.level.max(y.level);
    let deepest = depth.min(seq.len() - 1).max(start);
    // adjacency at a level implies adjacency of the images at every shallower level
    let a = refine(seq, x, deepest)?;
    let b = refine(seq, y, deepest)?;
    let g = seq.level(deepest);
    Ok(a.members.iter().any(|&p| b.members.iter().any(|&q| g.adjacent(p, q))))
}

/// Least `m ≤ depth` and least `g: U_m -> Y` with `f ∘ g = h ∘ u_n^m`.
pub fn star_solve(
    seq: &ProfiniteBase,
    n: usize,
    h: &GraphMap,
    f: &GraphMap,
    depth: usize,
) -> Result<(usize, GraphMap)> {
    seq.check_level(n)?;
    if h.dom() != seq.level(n) {
        return Err(Error::BaseMismatch("h is not defined on its level"));
    }
    if h.cod() != f.cod() {
        return Err(Error::CodomainMismatch);
    }
    if !h.is_quotient() || !f.is_quotient() {
        return Err(Error::NotQuotient("star_solve input"));
    }
    let last = depth.min(seq.len() - 1);
    Factorisation::over(f.dom(), n, f, Some(h))
        .first_level(seq, n..=last)?
        .ok_or(Error::PrefixTooShallow { searched: last + 1 })
}

/// The quotient of `U_n` sending the listed parts to `0, 1, ...`, with the graph it induces.
fn indicator(seq: &ProfiniteBase, n: usize, part: impl Fn(Vertex) -> Vertex, k: usize) -> GraphMap {
    let u = seq.level(n);
    let assign: Vec<Vertex> = u.vertices().map(part).collect();
    let pairs: Vec<(Vertex, Vertex)> =
        u.edges().iter().map(|&(a, b)| (assign[a], assign[b])).filter(|(p, q)| p != q).collect();
    let s = Arc::new(FiniteGraph::from_pairs_unchecked(k, pairs));
    GraphMap::new_unchecked(u.clone(), s, assign)
}

/// Finds an adjacent pair of distinct vertices inside `w` at some level up to `depth`.
///
/// With `S` the two-vertex quotient `w` / rest, the gadget `T` adds an edge `{2, 3}` over the
/// `w` vertex of `S`, disconnected from everything else; any lift of `U -> S` through `T -> S`
/// puts the two ends of that edge in `w`.
pub fn find_edge_in_clopen(seq: &ProfiniteBase, w: &Clopen, depth: usize) -> Result<EdgeWitness> {
    if w.is_empty() {
        return Err(Error::Precondition("clopen set is empty".into()));
    }
    let n = w.level;
    let rest = w.complement(seq);
    if rest.is_empty() {
        // the whole space: any edge will do
        let last = depth.min(seq.len() - 1);
        return (n..=last)
            .find_map(|m| seq.level(m).edges().first().map(|&pair| EdgeWitness { level: m, pair }))
            .ok_or(Error::PrefixTooShallow { searched: last + 1 });
    }
    let h = indicator(seq, n, |v| usize::from(!w.members.contains(&v)), 2);
    let s = h.cod().clone();
    let mut tp = s.edges().to_vec();
    tp.push((2, 3));
    let t = Arc::new(FiniteGraph::from_pairs_unchecked(4, tp));
    let f = GraphMap::new_unchecked(t, s, vec![0, 1, 0, 0]);
    let (m, g) = star_solve(seq, n, &h, &f, depth)?;
    let u = seq.level(m);
    let pair = u
        .edges()
        .iter()
        .copied()
        .find(|&(a, b)| {
            let (p, q) = (g.apply(a), g.apply(b));
            (p, q) == (2, 3) || (p, q) == (3, 2)
        })
        .expect("a quotient onto T realises the edge {2, 3}");
    Ok(EdgeWitness { level: m, pair })
}

/// A partition of the whole space into two clopen sets with no edges between them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separation {
    pub level: usize,
    pub w_a: Clopen,
    pub w_b: Clopen,
}

impl Separation {
    /// Number of edges of the witness level between the two halves.
    pub fn cross_edges(&self, seq: &ProfiniteBase) -> usize {
        seq.level(self.level)
            .edges()
            .iter()
            .filter(|&&(p, q)| {
                (self.w_a.members.contains(&p) && self.w_b.members.contains(&q))
                    || (self.w_b.members.contains(&p) && self.w_a.members.contains(&q))
            })
            .count()
    }
}

/// Separates non-adjacent clopen sets `a` and `b` by a clopen partition without cross edges.
///
/// `S` has vertices `0` (for `a`), `1` (for `b`) and `2` (the rest), `T` replaces `2` by two
/// vertices `2` and `3` where `2` only meets the `a` side and `3` only the `b` side. A lift of
/// `U -> S` through `T -> S` then splits the rest between the two sides.
pub fn separate(seq: &ProfiniteBase, a: &Clopen, b: &Clopen, depth: usize) -> Result<Separation> {
    let n = a.level.max(b.level);
    let a = refine(seq, a, n)?;
    let b = refine(seq, b, n)?;
    if let Some(v) = a.members.intersection(&b.members).next() {
        return Err(Error::Precondition(format!("sets share vertex {v} at level {n}")));
    }
    let u = seq.level(n);
    for &p in &a.members {
        if let Some(&q) = u.neighbors(p).iter().find(|q| b.members.contains(q)) {
            return Err(Error::Precondition(format!("vertices {p} and {q} are adjacent at level {n}")));
        }
    }
    let rest: BTreeSet<Vertex> = u.vertices().filter(|v| !a.members.contains(v) && !b.members.contains(v)).collect();
    if a.is_empty() || b.is_empty() || rest.is_empty() {
        let w_a = if b.is_empty() { Clopen::full(seq, n)? } else { a.clone() };
        let w_b = w_a.complement(seq);
        return Ok(Separation { level: n, w_a, w_b });
    }
    let part = |v: Vertex| {
        if a.members.contains(&v) {
            0
        } else if b.members.contains(&v) {
            1
        } else {
            2
        }
    };
    let h = indicator(seq, n, part, 3);
    let s = h.cod().clone();
    let mut tp = Vec::new();
    if s.adjacent(0, 2) {
        tp.push((0, 2));
    }
    if s.adjacent(1, 2) {
        tp.push((1, 3));
    }
    let t = Arc::new(FiniteGraph::from_pairs_unchecked(4, tp));
    let f = GraphMap::new_unchecked(t, s, vec![0, 1, 2, 2]);
    let (m, g) = star_solve(seq, n, &h, &f, depth)?;
    let w_a = Clopen { level: m, members: seq.level(m).vertices().filter(|&w| matches!(g.apply(w), 0 | 2)).collect() };
    let w_b = w_a.complement(seq);
    Ok(Separation { level: m, w_a, w_b })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NowhereWitness {
    pub level: usize,
    pub vertex: Vertex,
    /// `(m, w)` with `w` over `vertex` at level `m` and outside the image of `phi_m`.
    pub witness: Option<(usize, Vertex)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationWitness {
    pub points: (Vertex, Vertex),
    /// Least level where the two images are distinct and non-adjacent.
    pub level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retraction {
    pub level: usize,
    /// `r: U_level -> K`, with `K` read as a graph of isolated vertices.
    pub assign: Vec<Vertex>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitWitness {
    pub level: usize,
    pub vertex: Vertex,
    /// Least deeper level where the vertex has at least two preimages.
    pub split_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub audited_depth: usize,
    /// Least level from which `phi` is injective on base points.
    pub injective_from: Option<usize>,
    pub nowhere_dense: Vec<NowhereWitness>,
    pub isolated: Vec<IsolationWitness>,
    /// Retractions at every level from the first where one exists.
    pub retractions: Vec<Retraction>,
    pub splitting: Vec<SplitWitness>,
}

impl EmbeddingReport {
    pub fn nowhere_dense_up_to(&self, level: usize) -> bool {
        self.nowhere_dense.iter().filter(|w| w.level <= level).all(|w| w.witness.is_some())
    }

    pub fn isolated_image(&self) -> bool {
        self.isolated.iter().all(|w| w.level.is_some())
    }
}

fn comma_of(report: &BuildReport) -> Result<&CommaData> {
    report.comma.as_ref().ok_or_else(|| Error::Precondition("not a comma build".into()))
}

/// Least level at or below `depth` where `r: U_k -> K` with `r ∘ phi_k = id` exists.
pub fn retraction_at(report: &BuildReport, k: usize) -> Result<Option<Retraction>> {
    let comma = comma_of(report)?;
    let seq = &report.sequence;
    seq.check_level(k)?;
    let points = comma.points();
    let target = Arc::new(FiniteGraph::discrete(points)?);
    let pins: Vec<(Vertex, Vertex)> = comma.phis[k].iter().copied().zip(0..points).collect();
    let fac = Factorisation::plain(&target);
    Ok(fac.on_graph(seq.level(k), |w| w, &pins)?.map(|r| Retraction { level: k, assign: r.assign().to_vec() }))
}

/// Audits the embedding `phi` of a comma build. See [`EmbeddingReport`] for the fields.
pub fn embedding_report(report: &BuildReport, depth: usize) -> Result<EmbeddingReport> {
    let comma = comma_of(report)?;
    let seq = &report.sequence;
    let last = depth.min(seq.len() - 1);
    let points = comma.points();
    let image = |m: usize| -> BTreeSet<Vertex> { comma.phis[m].iter().copied().collect() };

    let injective_from = (0..=last).find(|&m| image(m).len() == points);

    let mut nowhere_dense = Vec::new();
    let mut splitting = Vec::new();
    for n in 0..=last {
        for v in seq.level(n).vertices() {
            let witness = (n..=last).find_map(|m| {
                let img = image(m);
                seq.level(m).vertices().find(|&w| seq.project(m, n, w) == v && !img.contains(&w)).map(|w| (m, w))
            });
            nowhere_dense.push(NowhereWitness { level: n, vertex: v, witness });
            let split_at =
                (n + 1..=last).find(|&m| seq.level(m).vertices().filter(|&w| seq.project(m, n, w) == v).count() >= 2);
            splitting.push(SplitWitness { level: n, vertex: v, split_at });
        }
    }

    let mut isolated = Vec::new();
    for p in 0..points {
        for q in p + 1..points {
            let level = (0..=last).find(|&m| {
                let (a, b) = (comma.phis[m][p], comma.phis[m][q]);
                a != b && !seq.level(m).adjacent(a, b)
            });
            isolated.push(IsolationWitness { points: (p, q), level });
        }
    }

    let mut retractions = Vec::new();
    for k in 0..=last {
        match retraction_at(report, k)? {
            Some(r) => retractions.push(r),
            None if retractions.is_empty() => continue,
            // a retraction at one level composes with the bonds to every deeper level
            None => unreachable!("retractions persist under refinement"),
        }
    }

    Ok(EmbeddingReport { audited_depth: last, injective_from, nowhere_dense, isolated, retractions, splitting })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraisse::{build_comma_prefix, build_prefix, BuildConfig};

    fn default_build() -> BuildReport {
        build_prefix(&BuildConfig::default(), &FiniteGraph::single_edge()).unwrap()
    }

    #[test]
    fn refine_keeps_denotation() {
        let r = default_build();
        let seq = &r.sequence;
        for n in 0..3 {
            for v in seq.level(n).vertices() {
                let c = Clopen::cylinder(seq, n, v).unwrap();
                assert_eq!(refine(seq, &c, n).unwrap(), c);
                for m in n..seq.len() {
                    let d = refine(seq, &c, m).unwrap();
                    let back: BTreeSet<_> = d.members.iter().map(|&w| seq.project(m, n, w)).collect();
                    assert_eq!(back, c.members);
                }
            }
        }
        let full = Clopen::full(seq, 0).unwrap();
        assert_eq!(refine(seq, &full, 4).unwrap(), Clopen::full(seq, 4).unwrap());
        assert!(refine(seq, &full, seq.len()).is_err());
    }

    #[test]
    fn edge_possible_is_reflexive() {
        let r = default_build();
        let c = Clopen::cylinder(&r.sequence, 1, 0).unwrap();
        assert!(edge_possible(&r.sequence, &c, &c, 7).unwrap());
    }

    #[test]
    fn star_with_identity_returns_h() {
        let r = default_build();
        let seq = &r.sequence;
        let h = seq.composite(0, 2).unwrap();
        let h = GraphMap::new(seq.level(2).clone(), seq.level(0).clone(), h.assign().to_vec()).unwrap();
        let id = GraphMap::identity(seq.level(0).clone());
        let (m, g) = star_solve(seq, 2, &h, &id, 7).unwrap();
        assert_eq!((m, g), (2, h));
    }

    #[test]
    fn separation_postconditions() {
        let r = default_build();
        let seq = &r.sequence;
        let a = Clopen::cylinder(seq, 0, 0).unwrap();
        let empty = Clopen::empty(0);
        let s = separate(seq, &empty, &a, 7).unwrap();
        assert!(s.w_a.is_empty() && s.cross_edges(seq) == 0);
        let b = Clopen::cylinder(seq, 0, 1).unwrap();
        assert!(matches!(separate(seq, &a, &b, 7), Err(Error::Precondition(_))));
    }

    #[test]
    fn one_point_base_embedding() {
        let base = ProfiniteBase::new(Arc::new(FiniteGraph::singleton()));
        let r = build_comma_prefix(&BuildConfig::new(2, 5), &base, &FiniteGraph::single_edge()).unwrap();
        let e = embedding_report(&r, 4).unwrap();
        assert_eq!(e.injective_from, Some(0));
        assert!(e.isolated_image());
        assert_eq!(e.retractions.first().map(|r| r.level), Some(0));
        assert!(e.retractions.iter().all(|r| r.assign.iter().all(|&x| x == 0)));
    }
}
