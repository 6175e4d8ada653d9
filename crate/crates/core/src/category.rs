//! Pullbacks of quotients and the comma category over a profinite base.
//!
//! A [`ProfiniteBase`] is a finite prefix `G_0 <- G_1 <- ...` of an inverse sequence of finite
//! graphs along quotient bonds. The same type carries the prefix of the universal sequence
//! built by [`crate::fraisse`], and the base space `K` of the comma category (a space is a
//! sequence of discrete graphs; its edges are simply ignored there).

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, Vertex};
use crate::maps::{compose, GraphMap};

pub fn terminal() -> FiniteGraph {
    FiniteGraph::singleton()
}

/// Categorical product: pairs numbered row-major, `(x, y) -> x * |Y| + y`, adjacency is the
/// conjunction of the coordinate relations.
pub fn product(x: &Arc<FiniteGraph>, y: &Arc<FiniteGraph>) -> (Arc<FiniteGraph>, GraphMap, GraphMap) {
    let ny = y.n();
    let id = |a: Vertex, b: Vertex| a * ny + b;
    let mut pairs = Vec::new();
    for a1 in x.vertices() {
        for a2 in std::iter::once(a1).chain(x.neighbors(a1).iter().copied()) {
            if a2 < a1 {
                continue;
            }
            for b1 in y.vertices() {
                for b2 in std::iter::once(b1).chain(y.neighbors(b1).iter().copied()) {
                    pairs.push((id(a1, b1), id(a2, b2)));
                }
            }
        }
    }
    let z = Arc::new(FiniteGraph::from_pairs_unchecked(x.n() * ny, pairs));
    let px = GraphMap::new_unchecked(z.clone(), x.clone(), z.vertices().map(|v| v / ny).collect());
    let py = GraphMap::new_unchecked(z.clone(), y.clone(), z.vertices().map(|v| v % ny).collect());
    debug_assert!(px.is_quotient() && py.is_quotient());
    (z, px, py)
}

/// A pullback square `W -> X`, `W -> Y` over a cospan of quotients.
#[derive(Clone, Debug)]
pub struct Pullback {
    pub apex: Arc<FiniteGraph>,
    pub left: GraphMap,
    pub right: GraphMap,
    /// `pairs[w] = (x, y)`, lexicographically ordered.
    pub pairs: Vec<(Vertex, Vertex)>,
}

impl Pullback {
    /// Vertex of `W` for the pair `(x, y)`, if it lies over the cospan.
    pub fn index_of(&self, x: Vertex, y: Vertex) -> Option<Vertex> {
        self.pairs.binary_search(&(x, y)).ok()
    }
}

fn pullback_unchecked(q1: &GraphMap, q2: &GraphMap) -> Result<Pullback> {
    let (x, y) = (q1.dom(), q2.dom());
    let mut fibre: Vec<Vec<Vertex>> = vec![Vec::new(); q2.cod().n()];
    for b in y.vertices() {
        fibre[q2.apply(b)].push(b);
    }
    let pairs: Vec<(Vertex, Vertex)> =
        x.vertices().flat_map(|a| fibre[q1.apply(a)].iter().map(move |&b| (a, b))).collect();
    if pairs.is_empty() {
        return Err(Error::EmptyPullback);
    }
    // vertex ids of pairs over a fixed x are contiguous
    let mut start = vec![0; x.n() + 1];
    for &(a, _) in &pairs {
        start[a + 1] += 1;
    }
    for a in 0..x.n() {
        start[a + 1] += start[a];
    }
    let lookup = |a: Vertex, b: Vertex| -> Option<Vertex> {
        let slice = &pairs[start[a]..start[a + 1]];
        slice.binary_search_by(|p| p.1.cmp(&b)).ok().map(|i| start[a] + i)
    };
    let mut edges = Vec::new();
    for (w, &(a1, b1)) in pairs.iter().enumerate() {
        for a2 in std::iter::once(a1).chain(x.neighbors(a1).iter().copied()) {
            for b2 in std::iter::once(b1).chain(y.neighbors(b1).iter().copied()) {
                if let Some(w2) = lookup(a2, b2) {
                    if w2 > w {
                        edges.push((w, w2));
                    }
                }
            }
        }
    }
    let apex = Arc::new(FiniteGraph::from_pairs_unchecked(pairs.len(), edges));
    let left = GraphMap::new_unchecked(apex.clone(), x.clone(), pairs.iter().map(|p| p.0).collect());
    let right = GraphMap::new_unchecked(apex.clone(), y.clone(), pairs.iter().map(|p| p.1).collect());
    Ok(Pullback { apex, left, right, pairs })
}

/// Amalgamation of two quotients with a common codomain.
pub fn pullback(q1: &GraphMap, q2: &GraphMap) -> Result<Pullback> {
    if q1.cod() != q2.cod() {
        return Err(Error::CodomainMismatch);
    }
    if !q1.is_quotient() || !q2.is_quotient() {
        return Err(Error::NotQuotient("pullback leg"));
    }
    pullback_unchecked(q1, q2)
}

/// Greedily deletes apex vertices (highest id first) as long as every listed map, restricted to
/// the survivors, is still a quotient and every vertex in `keep` survives. Survivor `i` of the
/// returned apex was vertex `old_ids[i]`.
pub fn reduce_apex(
    apex: &Arc<FiniteGraph>,
    maps: &[&GraphMap],
    keep: &BTreeSet<Vertex>,
) -> (Arc<FiniteGraph>, Vec<GraphMap>, Vec<Vertex>) {
    reduce_apex_with(apex, maps, keep, false)
}

/// As [`reduce_apex`]; with `fibre_edges` set, a fibre that contains an edge keeps one.
pub fn reduce_apex_with(
    apex: &Arc<FiniteGraph>,
    maps: &[&GraphMap],
    keep: &BTreeSet<Vertex>,
    fibre_edges: bool,
) -> (Arc<FiniteGraph>, Vec<GraphMap>, Vec<Vertex>) {
    let n = apex.n();
    let mut alive = vec![true; n];
    let mut fibre_count: Vec<Vec<usize>> = maps
        .iter()
        .map(|m| {
            let mut c = vec![0; m.cod().n()];
            for v in 0..n {
                c[m.apply(v)] += 1;
            }
            c
        })
        .collect();
    // edge witness counts per map: for each codomain edge, how many live apex edges realise it
    let mut witness: Vec<std::collections::HashMap<(Vertex, Vertex), usize>> = maps
        .iter()
        .map(|m| {
            let mut h = std::collections::HashMap::new();
            for &(a, b) in apex.edges() {
                let (p, q) = (m.apply(a), m.apply(b));
                if p != q || fibre_edges {
                    *h.entry((p.min(q), p.max(q))).or_insert(0) += 1;
                }
            }
            h
        })
        .collect();
    for v in (0..n).rev() {
        if keep.contains(&v) {
            continue;
        }
        let removable = maps.iter().enumerate().all(|(i, m)| {
            if fibre_count[i][m.apply(v)] <= 1 {
                return false;
            }
            let mut lost: std::collections::HashMap<(Vertex, Vertex), usize> = Default::default();
            for &w in apex.neighbors(v) {
                if !alive[w] {
                    continue;
                }
                let (p, q) = (m.apply(v), m.apply(w));
                if p != q || fibre_edges {
                    *lost.entry((p.min(q), p.max(q))).or_insert(0) += 1;
                }
            }
            lost.iter().all(|(e, &k)| witness[i][e] > k)
        });
        if !removable {
            continue;
        }
        alive[v] = false;
        for (i, m) in maps.iter().enumerate() {
            fibre_count[i][m.apply(v)] -= 1;
            for &w in apex.neighbors(v) {
                if !alive[w] {
                    continue;
                }
                let (p, q) = (m.apply(v), m.apply(w));
                if p != q || fibre_edges {
                    *witness[i].get_mut(&(p.min(q), p.max(q))).unwrap() -= 1;
                }
            }
        }
    }
    let survivors: BTreeSet<Vertex> = (0..n).filter(|&v| alive[v]).collect();
    let (sub, old_ids) = apex.induced_subgraph(&survivors).expect("fibres keep a survivor");
    let sub = Arc::new(sub);
    let restricted = maps
        .iter()
        .map(|m| {
            let a = old_ids.iter().map(|&v| m.apply(v)).collect();
            let r = GraphMap::new_unchecked(sub.clone(), m.cod().clone(), a);
            debug_assert!(r.is_quotient());
            r
        })
        .collect();
    (sub, restricted, old_ids)
}

/// Finite prefix of an inverse sequence of graphs along quotient bonds.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BaseRepr", into = "BaseRepr")]
pub struct ProfiniteBase {
    levels: Vec<Arc<FiniteGraph>>,
    /// `bonds[k]: levels[k + 1] -> levels[k]`.
    bonds: Vec<GraphMap>,
    /// `proj[m][n][w]`: image of `w ∈ levels[m]` at level `n ≤ m`.
    proj: Vec<Vec<Vec<Vertex>>>,
}

#[derive(Serialize, Deserialize)]
struct BaseRepr {
    levels: Vec<FiniteGraph>,
    bonds: Vec<GraphMap>,
}

impl TryFrom<BaseRepr> for ProfiniteBase {
    type Error = Error;

    fn try_from(r: BaseRepr) -> Result<Self> {
        let mut it = r.levels.into_iter();
        let first = it.next().ok_or(Error::EmptyGraph)?;
        let mut base = ProfiniteBase::new(Arc::new(first));
        if r.bonds.len() != it.len() {
            return Err(Error::Precondition("one bond per level above the root".into()));
        }
        for (level, bond) in it.zip(r.bonds) {
            if **bond.dom() != level {
                return Err(Error::CompositionMismatch);
            }
            base.push(bond)?;
        }
        Ok(base)
    }
}

impl From<ProfiniteBase> for BaseRepr {
    fn from(b: ProfiniteBase) -> Self {
        BaseRepr { levels: b.levels.iter().map(|g| (**g).clone()).collect(), bonds: b.bonds }
    }
}

impl PartialEq for ProfiniteBase {
    fn eq(&self, other: &Self) -> bool {
        self.levels == other.levels && self.bonds == other.bonds
    }
}

impl Eq for ProfiniteBase {}

impl ProfiniteBase {
    pub fn new(root: Arc<FiniteGraph>) -> Self {
        let n = root.n();
        ProfiniteBase { levels: vec![root], bonds: Vec::new(), proj: vec![vec![(0..n).collect()]] }
    }

    /// A constant sequence `g <- g <- ...` of the given length, bonded by identities.
    pub fn stationary(g: Arc<FiniteGraph>, len: usize) -> Self {
        let mut b = Self::new(g.clone());
        for _ in 1..len {
            b.push(GraphMap::identity(g.clone())).expect("identity bond");
        }
        b
    }

    /// Appends a level through a quotient bond onto the current top.
    pub fn push(&mut self, bond: GraphMap) -> Result<()> {
        if bond.cod() != self.top() {
            return Err(Error::CompositionMismatch);
        }
        if !bond.is_quotient() {
            return Err(Error::NotQuotient("bond"));
        }
        let m = self.levels.len();
        let mut rows: Vec<Vec<Vertex>> = Vec::with_capacity(m + 1);
        for n in 0..m {
            let below = &self.proj[m - 1][n];
            rows.push(bond.assign().iter().map(|&v| below[v]).collect());
        }
        rows.push(bond.dom().vertices().collect());
        self.levels.push(bond.dom().clone());
        self.bonds.push(bond);
        self.proj.push(rows);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn level(&self, k: usize) -> &Arc<FiniteGraph> {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Arc<FiniteGraph>] {
        &self.levels
    }

    pub fn bonds(&self) -> &[GraphMap] {
        &self.bonds
    }

    pub fn top(&self) -> &Arc<FiniteGraph> {
        self.levels.last().expect("nonempty")
    }

    pub fn check_level(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            Err(Error::LevelOutOfRange { level: k, len: self.len() })
        } else {
            Ok(())
        }
    }

    /// Image of `w ∈ level m` at level `n ≤ m`.
    pub fn project(&self, m: usize, n: usize, w: Vertex) -> Vertex {
        self.proj[m][n][w]
    }

    /// The composite bond `u_n^m : levels[m] -> levels[n]`.
    pub fn composite(&self, n: usize, m: usize) -> Result<GraphMap> {
        self.check_level(m)?;
        if n > m {
            return Err(Error::Precondition(format!("composite from level {m} down to {n}")));
        }
        Ok(GraphMap::new_unchecked(self.levels[m].clone(), self.levels[n].clone(), self.proj[m][n].clone()))
    }

    /// Truncation to the first `len` levels.
    pub fn prefix(&self, len: usize) -> ProfiniteBase {
        let mut b = ProfiniteBase::new(self.levels[0].clone());
        for bond in self.bonds.iter().take(len.saturating_sub(1)) {
            b.push(bond.clone()).expect("bonds were valid");
        }
        b
    }

    /// The level a base index refers to when the sequence is read as eventually constant.
    pub fn clamp(&self, k: usize) -> usize {
        k.min(self.len() - 1)
    }
}

/// A map from the base `K` (at base level `level`) into a finite graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommaObject {
    pub level: usize,
    pub psi: GraphMap,
}

impl CommaObject {
    pub fn new(base: &ProfiniteBase, level: usize, psi: GraphMap) -> Result<Self> {
        base.check_level(level)?;
        if psi.dom().n() != base.level(level).n() {
            return Err(Error::BaseMismatch("psi domain is not the base level"));
        }
        Ok(CommaObject { level, psi })
    }

    pub fn target(&self) -> &Arc<FiniteGraph> {
        self.psi.cod()
    }

    /// The assignment at a finer base level `m ≥ level` (clamped to the base length).
    pub fn values_at(&self, base: &ProfiniteBase, m: usize) -> Vec<Vertex> {
        let m = base.clamp(m.max(self.level));
        base.level(m).vertices().map(|x| self.psi.apply(base.project(m, self.level, x))).collect()
    }

    fn check(&self, base: &ProfiniteBase) -> Result<()> {
        base.check_level(self.level)?;
        if self.psi.dom().n() != base.level(self.level).n() {
            return Err(Error::BaseMismatch("psi domain is not the base level"));
        }
        Ok(())
    }
}

/// `q` is a quotient from `src`'s target onto `dst`'s target and `q ∘ psi_src = psi_dst` at the
/// common refinement level.
pub fn comma_arrow_check(base: &ProfiniteBase, src: &CommaObject, dst: &CommaObject, q: &GraphMap) -> Result<bool> {
    src.check(base)?;
    dst.check(base)?;
    if q.dom() != src.target() || q.cod() != dst.target() {
        return Ok(false);
    }
    if !q.is_quotient() {
        return Ok(false);
    }
    let m = src.level.max(dst.level);
    let a = src.values_at(base, m);
    let b = dst.values_at(base, m);
    Ok(a.iter().zip(&b).all(|(&x, &y)| q.apply(x) == y))
}

/// Result of amalgamating two comma arrows into a common object.
#[derive(Clone, Debug)]
pub struct CommaAmalgam {
    pub square: Pullback,
    /// The mediating object `k: K -> W`, `k(x) = (psi_f(x), psi_g(x))`.
    pub mediator: CommaObject,
}

pub fn comma_amalgamate(
    base: &ProfiniteBase,
    f: &CommaObject,
    g: &CommaObject,
    q1: &GraphMap,
    q2: &GraphMap,
) -> Result<CommaAmalgam> {
    f.check(base)?;
    g.check(base)?;
    if q1.dom() != f.target() || q2.dom() != g.target() {
        return Err(Error::NotCommaArrow("leg does not start at its object"));
    }
    let m = f.level.max(g.level);
    let fv = f.values_at(base, m);
    let gv = g.values_at(base, m);
    if fv.iter().zip(&gv).any(|(&a, &b)| q1.apply(a) != q2.apply(b)) {
        return Err(Error::NotCommaArrow("legs disagree on the base"));
    }
    let square = pullback(q1, q2)?;
    let assign = fv.iter().zip(&gv).map(|(&a, &b)| square.index_of(a, b).expect("pair lies over the cospan")).collect();
    let k = GraphMap::new_unchecked(base.level(base.clamp(m)).clone(), square.apex.clone(), assign);
    let mediator = CommaObject::new(base, base.clamp(m), k)?;
    Ok(CommaAmalgam { square, mediator })
}

/// Factors a map given on a deep level through the least level at which it is constant on
/// bond fibres, returning that level and the factor `f'` with `f = f' ∘ u_n^m`.
pub fn factor_through_level(base: &ProfiniteBase, m: usize, f: &GraphMap) -> Result<(usize, GraphMap)> {
    base.check_level(m)?;
    if f.dom() != base.level(m) {
        return Err(Error::BaseMismatch("map is not defined on that level"));
    }
    for n in 0..=m {
        let mut factor = vec![usize::MAX; base.level(n).n()];
        let consistent = base.level(m).vertices().all(|w| {
            let slot = &mut factor[base.project(m, n, w)];
            if *slot == usize::MAX {
                *slot = f.apply(w);
                true
            } else {
                *slot == f.apply(w)
            }
        });
        if consistent {
            let g = GraphMap::new_unchecked(base.level(n).clone(), f.cod().clone(), factor);
            debug_assert_eq!(compose(&g, &base.composite(n, m)?)?, *f);
            return Ok((n, g));
        }
    }
    unreachable!("level m itself always factors")
}
