//! Backtracking search for quotient maps under per-vertex candidate restrictions.
//!
//! Every lifting question in this crate has the same shape: find a quotient `g: D -> C` where
//! each domain vertex may only go to a prescribed set of codomain vertices (usually the fibre
//! of some other map). Vertices are assigned in increasing order and values tried in increasing
//! order, so the first solution found is the lexicographically least one.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, Vertex};

/// Codomains are encoded as bitmasks.
pub const MAX_SEARCH_CODOMAIN: usize = 64;

type Mask = u64;

fn bit(v: Vertex) -> Mask {
    1 << v
}

fn mask_iter(mut m: Mask) -> impl Iterator<Item = Vertex> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let v = m.trailing_zeros() as Vertex;
            m &= m - 1;
            Some(v)
        }
    })
}

/// Coverage of the codomain's vertices and edges, one bit each.
type Cover = u128;

/// A constrained quotient search from `dom` onto `cod`.
pub struct QuotientSearch<'a> {
    dom: &'a FiniteGraph,
    cod: &'a FiniteGraph,
    domains: Vec<Mask>,
    closed_nbr: Vec<Mask>,
    demands: Vec<(Vertex, Vertex)>,
    /// Present when the demands fit a [`Cover`]: components of `dom` and, per component, the
    /// maximal coverages its restricted maps can achieve.
    split: Option<Components>,
}

struct Components {
    comps: Vec<Vec<Vertex>>,
    first: Vec<Vertex>,
    profiles: Vec<Vec<Cover>>,
    edge_bit: std::collections::HashMap<(Vertex, Vertex), u32>,
    full: Cover,
}

impl<'a> QuotientSearch<'a> {
    /// Every vertex may go anywhere.
    pub fn unrestricted(dom: &'a FiniteGraph, cod: &'a FiniteGraph) -> Result<Self> {
        Self::check_cod(cod)?;
        let all = if cod.n() == 64 { Mask::MAX } else { (1 << cod.n()) - 1 };
        Ok(Self::build(dom, cod, vec![all; dom.n()]))
    }

    /// `candidates[v]` lists the allowed images of `v`.
    pub fn with_candidates(dom: &'a FiniteGraph, cod: &'a FiniteGraph, candidates: &[Vec<Vertex>]) -> Result<Self> {
        Self::check_cod(cod)?;
        if candidates.len() != dom.n() {
            return Err(Error::BadAssignment { dom: dom.n(), len: candidates.len() });
        }
        let mut domains = Vec::with_capacity(dom.n());
        for list in candidates {
            let mut m = 0;
            for &c in list {
                if c >= cod.n() {
                    return Err(Error::VertexOutOfRange { vertex: c, n: cod.n() });
                }
                m |= bit(c);
            }
            domains.push(m);
        }
        Ok(Self::build(dom, cod, domains))
    }

    fn check_cod(cod: &FiniteGraph) -> Result<()> {
        if cod.n() > MAX_SEARCH_CODOMAIN {
            return Err(Error::CapExceeded { what: "quotient search codomain", n: cod.n(), cap: MAX_SEARCH_CODOMAIN });
        }
        Ok(())
    }

    fn build(dom: &'a FiniteGraph, cod: &'a FiniteGraph, domains: Vec<Mask>) -> Self {
        let closed_nbr = cod.vertices().map(|c| cod.neighbors(c).iter().fold(bit(c), |m, &d| m | bit(d))).collect();
        let demands: Vec<(Vertex, Vertex)> =
            cod.vertices().map(|c| (c, c)).chain(cod.edges().iter().copied()).collect();
        let mut search = QuotientSearch { dom, cod, domains, closed_nbr, demands, split: None };
        if search.demands.len() <= Cover::BITS as usize && dom.components().len() > 1 {
            search.split = Some(search.components());
        }
        search
    }

    fn components(&self) -> Components {
        let comps = self.dom.components();
        let first = comps.iter().map(|c| c[0]).collect();
        let n = self.cod.n();
        let edge_bit = self.cod.edges().iter().enumerate().map(|(i, &e)| (e, (n + i) as u32)).collect();
        let full = if self.demands.len() == Cover::BITS as usize { Cover::MAX } else { (1 << self.demands.len()) - 1 };
        let mut split = Components { comps, first, profiles: Vec::new(), edge_bit, full };
        split.profiles = split.comps.iter().map(|c| self.profiles(&split, c)).collect();
        split
    }

    /// Upper bound on what `comp` can cover given the current domains; exact once every vertex
    /// of `comp` is fixed.
    fn cover_bound(&self, split: &Components, comp: &[Vertex], domains: &[Mask]) -> Cover {
        let mut c: Cover = 0;
        for &v in comp {
            c |= domains[v] as Cover;
        }
        for &v in comp {
            for &w in self.dom.neighbors(v) {
                if w < v {
                    continue;
                }
                for p in mask_iter(domains[v]) {
                    for q in mask_iter(domains[w] & self.closed_nbr[p] & !bit(p)) {
                        c |= 1 << split.edge_bit[&(p.min(q), p.max(q))];
                    }
                }
            }
        }
        c
    }

    /// Maximal coverages over all homomorphisms of `comp` respecting the domains.
    fn profiles(&self, split: &Components, comp: &[Vertex]) -> Vec<Cover> {
        let mut found: Vec<Cover> = Vec::new();
        let mut domains = self.domains.clone();
        self.profile_walk(split, comp, 0, &mut domains, &mut found);
        found
    }

    fn profile_walk(
        &self,
        split: &Components,
        comp: &[Vertex],
        i: usize,
        domains: &mut Vec<Mask>,
        found: &mut Vec<Cover>,
    ) {
        let bound = self.cover_bound(split, comp, domains);
        if found.iter().any(|&f| bound & !f == 0) {
            return;
        }
        if i == comp.len() {
            found.retain(|&f| f & !bound != 0);
            found.push(bound);
            return;
        }
        let v = comp[i];
        for c in mask_iter(domains[v]) {
            let saved: Vec<Mask> = comp.iter().map(|&u| domains[u]).collect();
            domains[v] = bit(c);
            let mut ok = true;
            for &w in self.dom.neighbors(v) {
                domains[w] &= self.closed_nbr[c];
                if domains[w] == 0 {
                    ok = false;
                }
            }
            if ok {
                self.profile_walk(split, comp, i + 1, domains, found);
            }
            for (&u, &m) in comp.iter().zip(&saved) {
                domains[u] = m;
            }
        }
    }

    /// Whether the components can jointly cover every demand, with vertices below `fixed`
    /// already assigned.
    fn jointly_coverable(&self, split: &Components, domains: &[Mask], fixed: Vertex) -> bool {
        let mut base: Cover = 0;
        let mut open: Vec<&[Cover]> = Vec::new();
        for (i, comp) in split.comps.iter().enumerate() {
            if split.first[i] >= fixed {
                open.push(&split.profiles[i]);
            } else {
                base |= self.cover_bound(split, comp, domains);
            }
        }
        let mut reach = vec![base];
        for profiles in open {
            if reach.contains(&split.full) {
                return true;
            }
            let mut next: Vec<Cover> = Vec::new();
            for &r in &reach {
                for &p in profiles {
                    let u = r | p;
                    if next.iter().any(|&x| u & !x == 0) {
                        continue;
                    }
                    next.retain(|&x| x & !u != 0);
                    next.push(u);
                }
            }
            reach = next;
        }
        reach.contains(&split.full)
    }

    /// The lexicographically least quotient satisfying the restrictions.
    pub fn first(&self) -> Option<Vec<Vertex>> {
        let mut found = None;
        self.for_each(|a| {
            found = Some(a.to_vec());
            ControlFlow::Break(())
        });
        found
    }

    /// All solutions in lexicographic order.
    pub fn all(&self) -> Vec<Vec<Vertex>> {
        let mut out = Vec::new();
        self.for_each(|a| {
            out.push(a.to_vec());
            ControlFlow::Continue(())
        });
        out
    }

    /// Visits solutions in lexicographic order until the visitor breaks.
    pub fn for_each<F>(&self, mut visit: F)
    where
        F: FnMut(&[Vertex]) -> ControlFlow<()>,
    {
        if self.dom.n() < self.cod.n() {
            return;
        }
        let mut state =
            State { domains: self.domains.clone(), trail: Vec::new(), assign: vec![usize::MAX; self.dom.n()] };
        if state.domains.contains(&0) || !self.feasible(&state.domains, 0) {
            return;
        }
        let _ = self.descend(0, &mut state, &mut visit);
    }

    fn descend<F>(&self, v: Vertex, st: &mut State, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[Vertex]) -> ControlFlow<()>,
    {
        if v == self.dom.n() {
            return visit(&st.assign);
        }
        let options = st.domains[v];
        let branching = options.count_ones() > 1;
        for c in mask_iter(options) {
            let mark = st.trail.len();
            let mut shrunk = branching;
            let mut ok = true;
            st.trail.push((v, st.domains[v]));
            st.domains[v] = bit(c);
            for &w in self.dom.neighbors(v) {
                if w <= v {
                    continue;
                }
                let narrowed = st.domains[w] & self.closed_nbr[c];
                if narrowed != st.domains[w] {
                    st.trail.push((w, st.domains[w]));
                    st.domains[w] = narrowed;
                    shrunk = true;
                    if narrowed == 0 {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && shrunk {
                ok = self.feasible(&st.domains, v + 1);
            }
            if ok {
                st.assign[v] = c;
                let flow = self.descend(v + 1, st, visit);
                st.assign[v] = usize::MAX;
                if flow.is_break() {
                    return flow;
                }
            }
            while st.trail.len() > mark {
                let (w, m) = st.trail.pop().unwrap();
                st.domains[w] = m;
            }
        }
        ControlFlow::Continue(())
    }

    // Every codomain vertex and every codomain edge must still be realisable by some domain
    // vertex / domain edge, and the components of the domain must be able to share the work.
    fn feasible(&self, domains: &[Mask], fixed: Vertex) -> bool {
        if !self.realisable(domains) {
            return false;
        }
        match &self.split {
            Some(split) => self.jointly_coverable(split, domains, fixed),
            None => true,
        }
    }

    fn realisable(&self, domains: &[Mask]) -> bool {
        let mut covered: Mask = 0;
        for &m in domains {
            covered |= m;
        }
        self.demands.iter().all(|&(p, q)| {
            if p == q {
                return covered & bit(p) != 0;
            }
            if covered & bit(p) == 0 || covered & bit(q) == 0 {
                return false;
            }
            self.dom.edges().iter().any(|&(a, b)| {
                let (da, db) = (domains[a], domains[b]);
                (da & bit(p) != 0 && db & bit(q) != 0) || (da & bit(q) != 0 && db & bit(p) != 0)
            })
        })
    }
}

struct State {
    domains: Vec<Mask>,
    trail: Vec<(Vertex, Mask)>,
    assign: Vec<Vertex>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::GraphMap;
    use std::sync::Arc;

    fn brute_force(dom: &FiniteGraph, cod: &FiniteGraph) -> Vec<Vec<Vertex>> {
        let (n, k) = (dom.n(), cod.n());
        let mut out = Vec::new();
        let total = k.pow(n as u32);
        for code in 0..total {
            let mut a = vec![0; n];
            let mut c = code;
            for slot in a.iter_mut().rev() {
                *slot = c % k;
                c /= k;
            }
            let m = GraphMap::new(Arc::new(dom.clone()), Arc::new(cod.clone()), a.clone()).unwrap();
            if m.classify().quotient {
                out.push(a);
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_on_small_pairs() {
        let graphs: Vec<_> = (1..=4).flat_map(|n| crate::graph::enumerate_graphs(n).unwrap()).collect();
        for x in &graphs {
            for y in graphs.iter().filter(|y| y.n() <= x.n() && y.n() <= 3) {
                let found = QuotientSearch::unrestricted(x, y).unwrap().all();
                assert_eq!(found, brute_force(x, y), "{x:?} -> {y:?}");
            }
        }
    }

    #[test]
    fn candidates_restrict_the_search() {
        let p3 = FiniteGraph::path(3).unwrap();
        let e = FiniteGraph::single_edge();
        let s = QuotientSearch::with_candidates(&p3, &e, &[vec![0], vec![0, 1], vec![1]]).unwrap();
        assert_eq!(s.all(), vec![vec![0, 0, 1], vec![0, 1, 1]]);
        let s = QuotientSearch::with_candidates(&p3, &e, &[vec![0], vec![0], vec![0]]).unwrap();
        assert_eq!(s.first(), None);
    }
}
