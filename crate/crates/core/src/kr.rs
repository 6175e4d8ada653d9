//! Lifting along single merges and back-and-forth towers between two comma prefixes.
//!
//! A lift instance is a square
//!
//! ```text
//!   K --b--> Y
//!   |phi     | f
//!   v        v
//!   U_n --g--> X
//! ```
//!
//! with `g ∘ phi_n = f ∘ b`; a lift is a quotient `h: U_m -> Y` with `f ∘ h = g ∘ u_n^m` and
//! `h ∘ phi_m = b`. For a single merge `f` the explicit two-case construction is tried first
//! (separating the two fibres of `b`, and in the adjacent case planting a fresh edge away from
//! the image of `phi`); if the resulting map is not a quotient a constrained search is run.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::category::ProfiniteBase;
use crate::error::{Error, Result};
use crate::fraisse::{BuildReport, CommaData};
use crate::graph::Vertex;
use crate::limit::{find_edge_in_clopen, refine, separate, Clopen};
use crate::maps::{compose, elementary_decompose, merge_point, GraphMap};
use crate::solve::Factorisation;

/// Either side of a lift or a tower: a comma prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Side {
    pub sequence: ProfiniteBase,
    pub comma: CommaData,
}

impl Side {
    pub fn of(report: &BuildReport) -> Result<Self> {
        let comma = report.comma.clone().ok_or_else(|| Error::Precondition("not a comma build".into()))?;
        Ok(Side { sequence: report.sequence.clone(), comma })
    }

    pub fn points(&self) -> usize {
        self.comma.points()
    }

    pub fn phi(&self, m: usize) -> &[Vertex] {
        &self.comma.phis[m]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftInstance {
    /// `f: Y -> X`.
    pub f: GraphMap,
    /// `g: U_level -> X`.
    pub level: usize,
    pub g: GraphMap,
    /// `b: K -> Y` on the base points of the comma prefix.
    pub b: Vec<Vertex>,
}

impl LiftInstance {
    pub fn new(side: &Side, f: GraphMap, level: usize, g: GraphMap, b: Vec<Vertex>) -> Result<Self> {
        side.sequence.check_level(level)?;
        if g.dom() != side.sequence.level(level) {
            return Err(Error::BaseMismatch("g is not defined on its level"));
        }
        if g.cod() != f.cod() {
            return Err(Error::CodomainMismatch);
        }
        if !f.is_quotient() || !g.is_quotient() {
            return Err(Error::NotQuotient("lift input"));
        }
        if b.len() != side.points() {
            return Err(Error::BadAssignment { dom: side.points(), len: b.len() });
        }
        if let Some(&y) = b.iter().find(|&&y| y >= f.dom().n()) {
            return Err(Error::VertexOutOfRange { vertex: y, n: f.dom().n() });
        }
        let phi = side.phi(level);
        if phi.iter().zip(&b).any(|(&u, &y)| g.apply(u) != f.apply(y)) {
            return Err(Error::Precondition("g ∘ phi and f ∘ b disagree".into()));
        }
        Ok(LiftInstance { f, level, g, b })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftCase {
    /// `f` is an isomorphism.
    Trivial,
    /// The merged pair is not adjacent in `Y`.
    Disjoint,
    /// The merged pair is adjacent in `Y`.
    Adjacent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftRoute {
    Construction,
    Search,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lift {
    pub level: usize,
    pub h: GraphMap,
    pub case: LiftCase,
    pub route: LiftRoute,
}

/// Whether `h: U_m -> Y` solves the instance.
pub fn check_lift(side: &Side, inst: &LiftInstance, m: usize, h: &GraphMap) -> bool {
    let seq = &side.sequence;
    if m < inst.level || m >= seq.len() || h.dom() != seq.level(m) || h.cod() != inst.f.dom() {
        return false;
    }
    h.is_quotient()
        && seq.level(m).vertices().all(|w| inst.f.apply(h.apply(w)) == inst.g.apply(seq.project(m, inst.level, w)))
        && side.phi(m).iter().zip(&inst.b).all(|(&u, &y)| h.apply(u) == y)
}

fn search_lift(side: &Side, inst: &LiftInstance, depth: usize) -> Result<Option<(usize, GraphMap)>> {
    let pins =
        |k: usize| -> Vec<(Vertex, Vertex)> { side.phi(k).iter().copied().zip(inst.b.iter().copied()).collect() };
    let fac = Factorisation { target: inst.f.dom(), over: Some((inst.level, &inst.f, Some(&inst.g))), pins: &pins };
    let last = depth.min(side.sequence.len() - 1);
    fac.first_level(&side.sequence, inst.level..=last)
}

/// Least level `k ≥ from` where the images of two sets of base points are disjoint and
/// non-adjacent.
fn separating_level(side: &Side, from: usize, last: usize, p0: &[Vertex], p1: &[Vertex]) -> Option<usize> {
    (from..=last).find(|&k| {
        let phi = side.phi(k);
        let g = side.sequence.level(k);
        p0.iter().all(|&x| p1.iter().all(|&y| !g.adjacent(phi[x], phi[y]) && phi[x] != phi[y]))
    })
}

/// The explicit construction of the lift, or `None` where one of its ingredients is missing
/// within `depth`.
fn construct(
    side: &Side,
    inst: &LiftInstance,
    depth: usize,
    x0: Vertex,
    y0: Vertex,
    y1: Vertex,
) -> Result<Option<(usize, GraphMap)>> {
    let seq = &side.sequence;
    let n = inst.level;
    let last = depth.min(seq.len() - 1);
    let f = &inst.f;
    let w = Clopen::new(seq, n, inst.g.preimage(x0))?;
    let p0: Vec<Vertex> = (0..side.points()).filter(|&x| inst.b[x] == y0).collect();
    let p1: Vec<Vertex> = (0..side.points()).filter(|&x| inst.b[x] == y1).collect();
    let Some(k) = separating_level(side, n, last, &p0, &p1) else {
        return Ok(None);
    };
    let a = Clopen::new(seq, k, p0.iter().map(|&x| side.phi(k)[x]))?;
    let b = Clopen::new(seq, k, p1.iter().map(|&x| side.phi(k)[x]))?;
    let sep = match separate(seq, &a, &b, last) {
        Ok(s) => s,
        Err(e) if e.is_depth_exhausted() => return Ok(None),
        Err(e) => return Err(e),
    };
    let w0 = w.intersect(seq, &sep.w_a)?;
    let adjacent = f.dom().adjacent(y0, y1);

    // the fresh edge and its split, in the adjacent case
    let mut planted: Option<(Clopen, Vertex, usize)> = None;
    if adjacent {
        let escape = (n..=last).find_map(|l| {
            let image: BTreeSet<Vertex> = side.phi(l).iter().copied().collect();
            refine(seq, &w, l).ok()?.members.into_iter().find(|v| !image.contains(v)).map(|v| (l, v))
        });
        let Some((l, v)) = escape else { return Ok(None) };
        let w2 = Clopen::cylinder(seq, l, v)?;
        let edge = match find_edge_in_clopen(seq, &w2, last) {
            Ok(e) => e,
            Err(e) if e.is_depth_exhausted() => return Ok(None),
            Err(e) => return Err(e),
        };
        planted = Some((w2, edge.pair.0, edge.level));
    }

    let m = sep.level.max(planted.as_ref().map_or(0, |p| p.2));
    let outside = |x: Vertex| f.preimage(x)[0];
    let assign: Vec<Vertex> = seq
        .level(m)
        .vertices()
        .map(|u| {
            let x = inst.g.apply(seq.project(m, n, u));
            if x != x0 {
                return outside(x);
            }
            if let Some((w2, a, la)) = &planted {
                if w2.contains(seq, m, u) {
                    return if seq.project(m, *la, u) == *a { y0 } else { y1 };
                }
            }
            if w0.contains(seq, m, u) {
                y0
            } else {
                y1
            }
        })
        .collect();
    Ok(Some((m, GraphMap::new_unchecked(seq.level(m).clone(), f.dom().clone(), assign))))
}

/// Lifts `g` through a single merge (or an isomorphism) `f`.
pub fn lift(side: &Side, inst: &LiftInstance, depth: usize) -> Result<Lift> {
    let seq = &side.sequence;
    let last = depth.min(seq.len() - 1);
    let too_shallow = Error::PrefixTooShallow { searched: last + 1 };
    if let Some(inv) = inst.f.inverse() {
        let h = compose(&inv, &inst.g)?;
        return Ok(Lift { level: inst.level, h, case: LiftCase::Trivial, route: LiftRoute::Construction });
    }
    let (x0, y0, y1) = merge_point(&inst.f).ok_or_else(|| Error::Precondition("f is not a single merge".into()))?;
    let case = if inst.f.dom().adjacent(y0, y1) { LiftCase::Adjacent } else { LiftCase::Disjoint };
    if let Some((m, h)) = construct(side, inst, depth, x0, y0, y1)? {
        if check_lift(side, inst, m, &h) {
            return Ok(Lift { level: m, h, case, route: LiftRoute::Construction });
        }
    }
    let (m, h) = search_lift(side, inst, depth)?.ok_or(too_shallow)?;
    Ok(Lift { level: m, h, case, route: LiftRoute::Search })
}

/// Lifts through an arbitrary quotient `f` by lifting through its single merges in turn.
pub fn lift_general(side: &Side, inst: &LiftInstance, depth: usize) -> Result<(Lift, Vec<Lift>)> {
    let d = elementary_decompose(&inst.f)?;
    let inv = d.residual.inverse().expect("residual is an isomorphism");
    // images of b along the chain: bs[i] lives on the domain of merges[i]
    let mut bs = vec![inst.b.clone()];
    for m in &d.merges {
        let next = bs.last().unwrap().iter().map(|&y| m.apply(y)).collect();
        bs.push(next);
    }
    let mut level = inst.level;
    let mut g = compose(&inv, &inst.g)?;
    let mut steps = Vec::new();
    for (i, merge) in d.merges.iter().enumerate().rev() {
        let step = LiftInstance { f: merge.clone(), level, g: g.clone(), b: bs[i].clone() };
        let l = lift(side, &step, depth)?;
        level = l.level;
        g = l.h.clone();
        steps.push(l);
    }
    let h = GraphMap::new_unchecked(side.sequence.level(level).clone(), inst.f.dom().clone(), g.assign().to_vec());
    let overall = Lift {
        level,
        h,
        case: steps.last().map_or(LiftCase::Trivial, |l| l.case),
        route: if steps.iter().all(|l| l.route == LiftRoute::Construction) {
            LiftRoute::Construction
        } else {
            LiftRoute::Search
        },
    };
    debug_assert!(check_lift(side, inst, level, &overall.h));
    Ok((overall, steps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// From a level of the left prefix onto a level of the right prefix.
    LeftToRight,
    RightToLeft,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub direction: Direction,
    pub source_level: usize,
    pub target_level: usize,
    pub assign: Vec<Vertex>,
}

/// Finite-depth witness of an isomorphism between two limits extending an isomorphism of
/// their bases: alternating quotients between levels whose consecutive composites are bonds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareTower {
    pub left: Side,
    pub right: Side,
    /// `h: K -> L` on base points.
    pub boundary: Vec<Vertex>,
    pub rungs: Vec<Rung>,
    /// The first obligation the prefixes could not meet, if the tower stopped early.
    pub unmet: Option<String>,
}

impl SquareTower {
    pub fn height(&self) -> usize {
        self.rungs.len()
    }

    fn sides(&self, d: Direction) -> (&Side, &Side) {
        match d {
            Direction::LeftToRight => (&self.left, &self.right),
            Direction::RightToLeft => (&self.right, &self.left),
        }
    }

    /// `rung` as a map between the two levels it joins.
    pub fn rung_map(&self, i: usize) -> Result<GraphMap> {
        let r = &self.rungs[i];
        let (s, t) = self.sides(r.direction);
        s.sequence.check_level(r.source_level)?;
        t.sequence.check_level(r.target_level)?;
        GraphMap::new(
            s.sequence.level(r.source_level).clone(),
            t.sequence.level(r.target_level).clone(),
            r.assign.clone(),
        )
    }

    /// Base points of the source side paired with their images on the target side.
    fn base_pairs(&self, d: Direction) -> Vec<(Vertex, Vertex)> {
        match d {
            Direction::LeftToRight => self.boundary.iter().copied().enumerate().collect(),
            Direction::RightToLeft => self.boundary.iter().copied().enumerate().map(|(x, y)| (y, x)).collect(),
        }
    }
}

fn check_boundary(left: &Side, right: &Side, h: &[Vertex]) -> Result<()> {
    let (p, q) = (left.points(), right.points());
    if h.len() != p || p != q {
        return Err(Error::Precondition("boundary map must be a bijection of base points".into()));
    }
    let img: BTreeSet<Vertex> = h.iter().copied().collect();
    if img.len() != p || img.iter().any(|&y| y >= q) {
        return Err(Error::Precondition("boundary map must be a bijection of base points".into()));
    }
    let kg = left.comma.base.level(left.comma.base_level);
    let lg = right.comma.base.level(right.comma.base_level);
    if !kg.edges().is_empty() || !lg.edges().is_empty() {
        return Err(Error::Precondition("base points must be pairwise non-adjacent".into()));
    }
    for a in 0..p {
        for b in a + 1..p {
            if kg.adjacent(a, b) != lg.adjacent(h[a], h[b]) {
                return Err(Error::Precondition(format!("boundary map breaks the edge relation at ({a}, {b})")));
            }
        }
    }
    Ok(())
}

/// Builds a back-and-forth tower extending `h: K -> L` between the comma prefixes `left`
/// (over `K`) and `right` (over `L`), until `height` rungs exist or the prefixes run out.
pub fn extend_isomorphism(
    left: &BuildReport,
    right: &BuildReport,
    h: &[Vertex],
    depth: usize,
    height: usize,
) -> Result<SquareTower> {
    let left = Side::of(left)?;
    let right = Side::of(right)?;
    check_boundary(&left, &right, h)?;
    let mut tower = SquareTower { left, right, boundary: h.to_vec(), rungs: Vec::new(), unmet: None };

    // rung 0: some right level onto the left root, carrying psi ∘ h to phi_0
    let first = {
        let (s, t) = (&tower.right, &tower.left);
        let target = t.sequence.level(0).clone();
        let pairs = tower.base_pairs(Direction::RightToLeft);
        let pins =
            |k: usize| -> Vec<(Vertex, Vertex)> { pairs.iter().map(|&(y, x)| (s.phi(k)[y], t.phi(0)[x])).collect() };
        let fac = Factorisation { target: &target, over: None, pins: &pins };
        fac.first_level(&s.sequence, 0..=depth.min(s.sequence.len() - 1))?
    };
    let Some((k0, r0)) = first else {
        tower.unmet = Some("no right level maps onto the left root".into());
        return Ok(tower);
    };
    tower.rungs.push(Rung {
        direction: Direction::RightToLeft,
        source_level: k0,
        target_level: 0,
        assign: r0.assign().to_vec(),
    });

    while tower.rungs.len() < height {
        let prev = tower.rungs.last().unwrap().clone();
        let dir = match prev.direction {
            Direction::LeftToRight => Direction::RightToLeft,
            Direction::RightToLeft => Direction::LeftToRight,
        };
        // the new rung starts on prev's target side, strictly deeper than any level used there
        let used = tower
            .rungs
            .iter()
            .filter(|r| r.direction == dir)
            .map(|r| r.source_level)
            .chain(std::iter::once(prev.target_level))
            .max()
            .unwrap();
        let f = tower.rung_map(tower.rungs.len() - 1)?;
        let (s, t) = tower.sides(dir);
        let base = tower.base_pairs(dir);
        let mut b = vec![0; s.points()];
        for &(x, y) in &base {
            b[x] = t.phi(prev.source_level)[y];
        }
        let g = GraphMap::identity(s.sequence.level(prev.target_level).clone());
        let inst = LiftInstance::new(s, f, prev.target_level, g, b)?;
        let lifted = match lift_general(s, &inst, depth) {
            Ok((l, _)) => l,
            Err(e) if e.is_depth_exhausted() => {
                tower.unmet = Some(format!("rung {}: {e}", tower.rungs.len()));
                break;
            }
            Err(e) => return Err(e),
        };
        let level = lifted.level.max(used + 1);
        if level >= s.sequence.len() || level > depth {
            tower.unmet = Some(format!("rung {}: no level deeper than {used} left", tower.rungs.len()));
            break;
        }
        let assign = s
            .sequence
            .level(level)
            .vertices()
            .map(|w| lifted.h.apply(s.sequence.project(level, lifted.level, w)))
            .collect();
        tower.rungs.push(Rung { direction: dir, source_level: level, target_level: prev.source_level, assign });
    }
    Ok(tower)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerFailure {
    pub rung: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerAudit {
    pub rungs_checked: usize,
    pub failures: Vec<TowerFailure>,
    pub warnings: Vec<String>,
}

impl TowerAudit {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-checks every rung against the boundary map, and each consecutive pair against the bonds.
pub fn verify_tower(t: &SquareTower) -> TowerAudit {
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    if t.rungs.is_empty() {
        warnings.push("empty tower".into());
    }
    let fail =
        |failures: &mut Vec<TowerFailure>, rung: usize, reason: String| failures.push(TowerFailure { rung, reason });
    if check_boundary(&t.left, &t.right, &t.boundary).is_err() {
        fail(&mut failures, 0, "boundary map is not an isomorphism of base points".into());
    }
    let mut maps: Vec<Option<GraphMap>> = Vec::new();
    for (i, r) in t.rungs.iter().enumerate() {
        let m = match t.rung_map(i) {
            Ok(m) => m,
            Err(e) => {
                fail(&mut failures, i, format!("not a map between the stated levels: {e}"));
                maps.push(None);
                continue;
            }
        };
        if !m.is_quotient() {
            fail(&mut failures, i, "not a quotient".into());
        }
        let (s, tg) = t.sides(r.direction);
        let bad_point = t
            .base_pairs(r.direction)
            .into_iter()
            .find(|&(x, y)| m.apply(s.phi(r.source_level)[x]) != tg.phi(r.target_level)[y]);
        if let Some((x, _)) = bad_point {
            fail(&mut failures, i, format!("base point {x} is not carried to its partner"));
        }
        if i > 0 {
            let p = &t.rungs[i - 1];
            if p.direction == r.direction || r.target_level != p.source_level {
                fail(&mut failures, i, "does not continue the previous rung".into());
            } else if let Some(pm) = &maps[i - 1] {
                let bond = s.sequence.composite(p.target_level, r.source_level);
                let ok = match (compose(pm, &m), bond) {
                    (Ok(c), Ok(b)) => c.assign() == b.assign(),
                    _ => false,
                };
                if !ok {
                    fail(&mut failures, i, "composite with the previous rung is not a bond".into());
                }
            }
        }
        maps.push(Some(m));
    }
    TowerAudit { rungs_checked: t.rungs.len(), failures, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::ProfiniteBase;
    use crate::fraisse::{build_comma_prefix, BuildConfig};
    use crate::graph::FiniteGraph;
    use std::sync::Arc;

    fn comma(points: usize) -> Side {
        let base = ProfiniteBase::new(Arc::new(FiniteGraph::discrete(points).unwrap()));
        let r = build_comma_prefix(&BuildConfig::default(), &base, &FiniteGraph::single_edge()).unwrap();
        Side::of(&r).unwrap()
    }

    #[test]
    fn identity_lift_is_g() {
        let s = comma(1);
        let x = s.sequence.level(1).clone();
        let g = GraphMap::identity(x.clone());
        let b = s.phi(1).to_vec();
        let inst = LiftInstance::new(&s, g.clone(), 1, g.clone(), b).unwrap();
        let l = lift(&s, &inst, 7).unwrap();
        assert_eq!((l.level, &l.h, l.case), (1, &g, LiftCase::Trivial));
    }

    #[test]
    fn lifts_onto_two_vertex_targets() {
        let s = comma(1);
        let pt = Arc::new(FiniteGraph::singleton());
        for y in [FiniteGraph::discrete(2).unwrap(), FiniteGraph::single_edge()] {
            let y = Arc::new(y);
            let f = GraphMap::constant(y.clone(), pt.clone(), 0).unwrap();
            let g = GraphMap::constant(s.sequence.level(0).clone(), pt.clone(), 0).unwrap();
            let inst = LiftInstance::new(&s, f, 0, g, vec![0]).unwrap();
            let l = lift(&s, &inst, 7).unwrap();
            assert!(check_lift(&s, &inst, l.level, &l.h));
            let expected = if y.edges().is_empty() { LiftCase::Disjoint } else { LiftCase::Adjacent };
            assert_eq!(l.case, expected);
        }
    }

    #[test]
    fn incompatible_instance_is_rejected() {
        let s = comma(2);
        let pt = Arc::new(FiniteGraph::singleton());
        let y = Arc::new(FiniteGraph::discrete(2).unwrap());
        let f = GraphMap::constant(y, pt.clone(), 0).unwrap();
        let g = GraphMap::constant(s.sequence.level(0).clone(), pt, 0).unwrap();
        assert!(LiftInstance::new(&s, f.clone(), 0, g.clone(), vec![0]).is_err());
        assert!(LiftInstance::new(&s, f, 0, g, vec![0, 2]).is_err());
    }

    #[test]
    fn empty_and_perturbed_towers() {
        let s = comma(1);
        let mut t = SquareTower { left: s.clone(), right: s, boundary: vec![0], rungs: vec![], unmet: None };
        let a = verify_tower(&t);
        assert!(a.passed() && !a.warnings.is_empty());
        t.rungs.push(Rung { direction: Direction::RightToLeft, source_level: 0, target_level: 0, assign: vec![0, 1] });
        assert!(verify_tower(&t).passed());
        t.rungs[0].assign = vec![0, 0];
        assert_eq!(verify_tower(&t).failures[0].rung, 0);
    }

    #[test]
    fn adjacent_base_points_are_rejected() {
        let base = ProfiniteBase::new(Arc::new(FiniteGraph::single_edge()));
        let r = build_comma_prefix(&BuildConfig::new(2, 3), &base, &FiniteGraph::single_edge()).unwrap();
        let err = extend_isomorphism(&r, &r, &[1, 0], 2, 2).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn identity_tower_on_one_point() {
        let base = ProfiniteBase::new(Arc::new(FiniteGraph::singleton()));
        let r = build_comma_prefix(&BuildConfig::default(), &base, &FiniteGraph::single_edge()).unwrap();
        let t = extend_isomorphism(&r, &r, &[0], 7, 3).unwrap();
        assert_eq!(t.height(), 3);
        assert!(verify_tower(&t).passed());
    }
}
