//! Level-by-level factorisation searches against a built sequence.
//!
//! Most questions asked of a prefix have the form: find the least level `k` in a range and
//! the least quotient `g: U_k -> Y` such that `g` sits over a prescribed map (`f ∘ g = h ∘ u`)
//! and possibly takes prescribed values on a few pinned vertices.

use std::sync::Arc;

use crate::category::ProfiniteBase;
use crate::error::Result;
use crate::graph::{FiniteGraph, Vertex};
use crate::maps::GraphMap;
use crate::search::QuotientSearch;

/// Constraints for a factorisation through one level.
pub struct Factorisation<'a> {
    /// Target of the sought quotient.
    pub target: &'a Arc<FiniteGraph>,
    /// `Some((n, f, h))` demands `f ∘ g = h ∘ u_n^k` with `f: target -> Z`, `h: U_n -> Z`.
    /// `h = None` means the identity of `U_n`.
    pub over: Option<(usize, &'a GraphMap, Option<&'a GraphMap>)>,
    /// For each level, a list of `(vertex, required image)`.
    pub pins: &'a dyn Fn(usize) -> Vec<(Vertex, Vertex)>,
}

fn no_pins(_: usize) -> Vec<(Vertex, Vertex)> {
    Vec::new()
}

impl<'a> Factorisation<'a> {
    pub fn plain(target: &'a Arc<FiniteGraph>) -> Self {
        Factorisation { target, over: None, pins: &no_pins }
    }

    pub fn over(target: &'a Arc<FiniteGraph>, n: usize, f: &'a GraphMap, h: Option<&'a GraphMap>) -> Self {
        Factorisation { target, over: Some((n, f, h)), pins: &no_pins }
    }

    /// Candidate lists for a graph `dom` whose vertices lie over level `n` via `down`.
    pub fn candidates(&self, dom_n: usize, down: impl Fn(Vertex) -> Vertex) -> Vec<Vec<Vertex>> {
        match self.over {
            None => vec![self.target.vertices().collect(); dom_n],
            Some((_, f, h)) => {
                let mut fibre: Vec<Vec<Vertex>> = vec![Vec::new(); f.cod().n()];
                for y in self.target.vertices() {
                    fibre[f.apply(y)].push(y);
                }
                (0..dom_n)
                    .map(|w| {
                        let z = down(w);
                        let z = h.map_or(z, |h| h.apply(z));
                        fibre[z].clone()
                    })
                    .collect()
            }
        }
    }

    /// Least quotient from level `k` satisfying the constraints.
    pub fn at_level(&self, seq: &ProfiniteBase, k: usize) -> Result<Option<GraphMap>> {
        let dom = seq.level(k);
        let mut cands = match self.over {
            None => self.candidates(dom.n(), |w| w),
            Some((n, _, _)) => {
                if n > k {
                    return Ok(None);
                }
                self.candidates(dom.n(), |w| seq.project(k, n, w))
            }
        };
        for (v, y) in (self.pins)(k) {
            cands[v].retain(|&c| c == y);
        }
        self.solve(dom, cands)
    }

    /// Least quotient from an arbitrary graph whose vertices lie over `U_n` via `down`.
    pub fn on_graph(
        &self,
        dom: &Arc<FiniteGraph>,
        down: impl Fn(Vertex) -> Vertex,
        pins: &[(Vertex, Vertex)],
    ) -> Result<Option<GraphMap>> {
        let mut cands = self.candidates(dom.n(), down);
        for &(v, y) in pins {
            cands[v].retain(|&c| c == y);
        }
        self.solve(dom, cands)
    }

    fn solve(&self, dom: &Arc<FiniteGraph>, cands: Vec<Vec<Vertex>>) -> Result<Option<GraphMap>> {
        if cands.iter().any(Vec::is_empty) {
            return Ok(None);
        }
        let search = QuotientSearch::with_candidates(dom, self.target, &cands)?;
        Ok(search.first().map(|a| GraphMap::new_unchecked(dom.clone(), self.target.clone(), a)))
    }

    /// Least `(k, g)` with `k` in `levels`.
    pub fn first_level(
        &self,
        seq: &ProfiniteBase,
        levels: impl IntoIterator<Item = usize>,
    ) -> Result<Option<(usize, GraphMap)>> {
        for k in levels {
            if k >= seq.len() {
                break;
            }
            if let Some(g) = self.at_level(seq, k)? {
                return Ok(Some((k, g)));
            }
        }
        Ok(None)
    }
}
