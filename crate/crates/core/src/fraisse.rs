//! Construction of finite prefixes of universal (Fraïssé) sequences.
//!
//! Two kinds of requirement drive the construction:
//!
//! * a *universality* requirement for a target `X`: some level maps onto `X`;
//! * an *absorption* requirement for a quotient `f: Y -> U_n`: some deeper level `U_k` has a
//!   quotient `g: U_k -> Y` with `f ∘ g = u_n^k`.
//!
//! Requirements are served strictly first-in first-out. A requirement that the current prefix
//! already satisfies is recorded with its least witness; otherwise the prefix is extended. A
//! universality requirement appends the product of the top level with the target, an absorption
//! requirement appends the pullback of `f` along `u_n^top`. Absorption requirements of one level
//! that sit together at the head of the queue are folded into a single new level by iterating
//! the pullback. Amalgams are pruned to a
//! minimal induced subgraph on which every leg is still a quotient.
//!
//! In comma mode every level carries a map `phi_n: K -> U_n` from a fixed finite base level, the
//! requirements carry maps from `K` as well, and amalgams carry the mediating map.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::category::{product, pullback, reduce_apex_with, CommaObject, ProfiniteBase};
use crate::error::{Error, Result};
use crate::graph::{enumerate_graphs, FiniteGraph, Vertex, DEFAULT_CANON_CAP};
use crate::maps::{compose, GraphMap, DEFAULT_ENUM_CAP};
use crate::solve::Factorisation;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Universality targets: every graph with at most this many vertices.
    pub size_cap: usize,
    /// Number of levels in the prefix.
    pub depth: usize,
    /// Absorption targets `Y -> U_n` have `|Y| ≤ |U_n| + a_slack` (0 or 1).
    pub a_slack: usize,
    /// Absorption requirements are generated only for levels with `|U_n| + a_slack` at most this.
    pub a_target_cap: usize,
    /// Prune amalgams to a minimal quotient-preserving induced subgraph.
    pub reduce: bool,
    /// When pruning, a fibre of either leg that contains an edge keeps one.
    pub keep_fibre_edges: bool,
    /// Requirements of the head's group queued right behind it are folded into the same new
    /// level while it has fewer vertices than this.
    pub batch_cap: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            size_cap: 3,
            depth: 8,
            a_slack: 1,
            a_target_cap: DEFAULT_ENUM_CAP,
            reduce: true,
            keep_fibre_edges: true,
            batch_cap: 64,
        }
    }
}

impl BuildConfig {
    pub fn new(size_cap: usize, depth: usize) -> Self {
        BuildConfig { size_cap, depth, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Precondition("depth must be at least 1".into()));
        }
        if self.size_cap == 0 {
            return Err(Error::Precondition("size cap must be at least 1".into()));
        }
        if self.size_cap > DEFAULT_CANON_CAP {
            return Err(Error::CapExceeded { what: "size cap", n: self.size_cap, cap: DEFAULT_CANON_CAP });
        }
        if self.a_slack > 1 {
            return Err(Error::Precondition("absorption slack above 1 is not supported".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequirementKind {
    /// Some level maps onto `target` (and sends `phi` to `psi` in comma mode).
    Universal {
        target: FiniteGraph,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        psi: Option<Vec<Vertex>>,
    },
    /// `f: source -> U_level` with `f` given by `assign`, absorbed by a deeper level.
    Absorb {
        level: usize,
        source: FiniteGraph,
        assign: Vec<Vertex>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        psi: Option<Vec<Vertex>>,
    },
}

impl RequirementKind {
    pub fn target(&self) -> &FiniteGraph {
        match self {
            RequirementKind::Universal { target, .. } => target,
            RequirementKind::Absorb { source, .. } => source,
        }
    }

    pub fn psi(&self) -> Option<&[Vertex]> {
        match self {
            RequirementKind::Universal { psi, .. } | RequirementKind::Absorb { psi, .. } => psi.as_deref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Pending,
    /// `witness` is the assignment of a quotient `U_level -> target`.
    Satisfied {
        level: usize,
        witness: Vec<Vertex>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: usize,
    /// Number of levels present when the requirement was enqueued.
    pub first_eligible: usize,
    /// Position in the order of attempts; `None` if never reached.
    pub attempt: Option<usize>,
    pub requirement: RequirementKind,
    pub status: Status,
}

impl Requirement {
    pub fn is_satisfied(&self) -> bool {
        matches!(self.status, Status::Satisfied { .. })
    }
}

/// The maps `phi_n: K_b -> U_n` of a comma prefix, `K_b` the chosen level of the base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommaData {
    pub base: ProfiniteBase,
    pub base_level: usize,
    pub phis: Vec<Vec<Vertex>>,
}

impl CommaData {
    pub fn points(&self) -> usize {
        self.base.level(self.base_level).n()
    }

    pub fn phi(&self, seq: &ProfiniteBase, n: usize) -> CommaObject {
        let psi = GraphMap::new_unchecked(
            self.base.level(self.base_level).clone(),
            seq.level(n).clone(),
            self.phis[n].clone(),
        );
        CommaObject { level: self.base_level, psi }
    }

    /// Pins `phi_k(x) -> psi(x)` for a requirement carrying `psi`.
    pub fn pins(&self, k: usize, psi: &[Vertex]) -> Vec<(Vertex, Vertex)> {
        self.phis[k].iter().copied().zip(psi.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub config: BuildConfig,
    pub sequence: ProfiniteBase,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub comma: Option<CommaData>,
    pub ledger: Vec<Requirement>,
    /// Levels whose absorption requirements exceed `a_target_cap` and were not enumerated.
    pub unenumerated_levels: Vec<usize>,
    /// Levels appended with an identity bond because the queue ran dry.
    pub padded_levels: Vec<usize>,
}

impl BuildReport {
    pub fn pending(&self) -> impl Iterator<Item = &Requirement> {
        self.ledger.iter().filter(|r| !r.is_satisfied())
    }

    /// The induced plain sequence of a comma prefix, as a plain report without ledger.
    pub fn plain_sequence(&self) -> &ProfiniteBase {
        &self.sequence
    }

    /// The `n`-th comma object, if this is a comma build.
    pub fn phi(&self, n: usize) -> Option<CommaObject> {
        self.comma.as_ref().map(|c| c.phi(&self.sequence, n))
    }
}

/// All quotients `Y -> g` with `|Y| = |g| + 1`, one per relabeling class of `Y`.
///
/// `Y` keeps the vertex ids of `g`; the merged vertex `x0` splits into `x0` and the new vertex
/// `n`. Each neighbour of `x0` is joined to one or both copies, and the copies are adjacent or
/// not. Swapping the two copies is a relabeling, so only one of each mirrored pair is returned.
pub fn single_merge_extensions(g: &Arc<FiniteGraph>) -> Vec<GraphMap> {
    let n = g.n();
    let mut out = Vec::new();
    for x0 in g.vertices() {
        let nbrs = g.neighbors(x0);
        let d = nbrs.len() as u32;
        for joined in [true, false] {
            for code in 0..3usize.pow(d) {
                // digit 0: both copies, 1: x0 only, 2: new vertex only
                let mut digits = Vec::with_capacity(nbrs.len());
                let mut c = code;
                for _ in 0..nbrs.len() {
                    digits.push(c % 3);
                    c /= 3;
                }
                let mirrored: Vec<usize> = digits.iter().map(|&t| [0, 2, 1][t]).collect();
                if mirrored.iter().rev().lt(digits.iter().rev()) {
                    continue;
                }
                let mut pairs: Vec<(Vertex, Vertex)> =
                    g.edges().iter().copied().filter(|&(a, b)| a != x0 && b != x0).collect();
                for (&z, &t) in nbrs.iter().zip(&digits) {
                    if t != 2 {
                        pairs.push((x0, z));
                    }
                    if t != 1 {
                        pairs.push((n, z));
                    }
                }
                if joined {
                    pairs.push((x0, n));
                }
                let y = Arc::new(FiniteGraph::from_pairs_unchecked(n + 1, pairs));
                let assign = (0..n).chain(std::iter::once(x0)).collect();
                let f = GraphMap::new_unchecked(y, g.clone(), assign);
                debug_assert!(f.is_quotient());
                out.push(f);
            }
        }
    }
    out
}

/// Least level `n` and least quotient `U_n -> x`.
pub fn verify_u(seq: &ProfiniteBase, x: &Arc<FiniteGraph>) -> Result<Option<(usize, GraphMap)>> {
    Factorisation::plain(x).first_level(seq, 0..seq.len())
}

/// Least `k ≥ n` and least `g: U_k -> Y` with `u_n^k = f ∘ g`.
pub fn verify_a(seq: &ProfiniteBase, n: usize, f: &GraphMap) -> Result<Option<(usize, GraphMap)>> {
    seq.check_level(n)?;
    if f.cod() != seq.level(n) {
        return Err(Error::CompositionMismatch);
    }
    if !f.is_quotient() {
        return Err(Error::NotQuotient("absorption target"));
    }
    Factorisation::over(f.dom(), n, f, None).first_level(seq, n..seq.len())
}

/// Comma universality: least `(n, g)` with `g: U_n -> X` a quotient and `g ∘ phi_n = psi`.
pub fn verify_comma_u(
    seq: &ProfiniteBase,
    comma: &CommaData,
    x: &Arc<FiniteGraph>,
    psi: &[Vertex],
) -> Result<Option<(usize, GraphMap)>> {
    let pins = |k: usize| comma.pins(k, psi);
    let fac = Factorisation { target: x, over: None, pins: &pins };
    fac.first_level(seq, 0..seq.len())
}

/// Comma absorption: least `(k, g)` with `f ∘ g = u_n^k` and `g ∘ phi_k = psi`.
pub fn verify_comma_a(
    seq: &ProfiniteBase,
    comma: &CommaData,
    n: usize,
    f: &GraphMap,
    psi: &[Vertex],
) -> Result<Option<(usize, GraphMap)>> {
    seq.check_level(n)?;
    if f.cod() != seq.level(n) {
        return Err(Error::CompositionMismatch);
    }
    let pins = |k: usize| comma.pins(k, psi);
    let fac = Factorisation { target: f.dom(), over: Some((n, f, None)), pins: &pins };
    fac.first_level(seq, n..seq.len())
}

struct Builder {
    cfg: BuildConfig,
    seq: ProfiniteBase,
    comma: Option<CommaData>,
    ledger: Vec<Requirement>,
    queue: VecDeque<usize>,
    attempts: usize,
    unenumerated: Vec<usize>,
    padded: Vec<usize>,
}

/// A requirement materialised against the current sequence.
struct Live {
    target: Arc<FiniteGraph>,
    over: Option<(usize, GraphMap)>,
    psi: Option<Vec<Vertex>>,
}

impl Builder {
    fn push_req(&mut self, requirement: RequirementKind) {
        let id = self.ledger.len();
        self.ledger.push(Requirement {
            id,
            first_eligible: self.seq.len(),
            attempt: None,
            requirement,
            status: Status::Pending,
        });
        self.queue.push_back(id);
    }

    fn enqueue_universal(&mut self) -> Result<()> {
        for m in 1..=self.cfg.size_cap {
            for x in enumerate_graphs(m)? {
                match &self.comma {
                    None => self.push_req(RequirementKind::Universal { target: x, psi: None }),
                    Some(c) => {
                        let p = c.points();
                        for psi in all_maps(p, x.n()) {
                            self.push_req(RequirementKind::Universal { target: x.clone(), psi: Some(psi) });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn enqueue_absorb(&mut self, level: usize) {
        let u = self.seq.level(level).clone();
        if u.n() + self.cfg.a_slack > self.cfg.a_target_cap {
            self.unenumerated.push(level);
            return;
        }
        let mut maps = vec![GraphMap::identity(u.clone())];
        if self.cfg.a_slack == 1 {
            maps.extend(single_merge_extensions(&u));
        }
        for f in maps {
            let source = (**f.dom()).clone();
            let assign = f.assign().to_vec();
            match self.comma.as_ref().map(|c| c.phis[level].clone()) {
                None => self.push_req(RequirementKind::Absorb { level, source, assign, psi: None }),
                Some(phi) => {
                    // every lift of phi_n through f
                    let choices: Vec<Vec<Vertex>> = phi.iter().map(|&v| f.preimage(v)).collect();
                    for psi in product_of(&choices) {
                        self.push_req(RequirementKind::Absorb {
                            level,
                            source: source.clone(),
                            assign: assign.clone(),
                            psi: Some(psi),
                        });
                    }
                }
            }
        }
    }

    fn live(&self, id: usize) -> Live {
        match &self.ledger[id].requirement {
            RequirementKind::Universal { target, psi } => {
                Live { target: Arc::new(target.clone()), over: None, psi: psi.clone() }
            }
            RequirementKind::Absorb { level, source, assign, psi } => {
                let y = Arc::new(source.clone());
                let f = GraphMap::new_unchecked(y.clone(), self.seq.level(*level).clone(), assign.clone());
                Live { target: y, over: Some((*level, f)), psi: psi.clone() }
            }
        }
    }

    fn check_existing(&self, live: &Live) -> Result<Option<(usize, GraphMap)>> {
        let comma = self.comma.as_ref();
        let psi = live.psi.clone();
        let pins = move |k: usize| match (comma, &psi) {
            (Some(c), Some(p)) => c.pins(k, p),
            _ => Vec::new(),
        };
        let fac =
            Factorisation { target: &live.target, over: live.over.as_ref().map(|(n, f)| (*n, f, None)), pins: &pins };
        let start = live.over.as_ref().map_or(0, |(n, _)| *n);
        fac.first_level(&self.seq, start..self.seq.len())
    }

    fn satisfy(&mut self, id: usize, level: usize, witness: &GraphMap) {
        self.ledger[id].status = Status::Satisfied { level, witness: witness.assign().to_vec() };
    }

    fn run(&mut self) -> Result<()> {
        while let Some(id) = self.queue.pop_front() {
            self.mark_attempt(id);
            let live = self.live(id);
            if let Some((k, g)) = self.check_existing(&live)? {
                self.satisfy(id, k, &g);
                continue;
            }
            if self.seq.len() >= self.cfg.depth {
                continue;
            }
            self.extend(id, live)?;
        }
        while self.seq.len() < self.cfg.depth {
            let top = self.seq.top().clone();
            self.padded.push(self.seq.len());
            self.seq.push(GraphMap::identity(top))?;
            if let Some(c) = &mut self.comma {
                let last = c.phis.last().unwrap().clone();
                c.phis.push(last);
            }
        }
        Ok(())
    }

    fn mark_attempt(&mut self, id: usize) {
        self.ledger[id].attempt = Some(self.attempts);
        self.attempts += 1;
    }

    fn prune(
        &self,
        apex: &Arc<FiniteGraph>,
        bond: GraphMap,
        leg: GraphMap,
        phi: Option<Vec<Vertex>>,
    ) -> (GraphMap, GraphMap, Option<Vec<Vertex>>) {
        if !self.cfg.reduce {
            return (bond, leg, phi);
        }
        let keep: BTreeSet<Vertex> = phi.iter().flatten().copied().collect();
        let (_, maps, old_ids) = reduce_apex_with(apex, &[&bond, &leg], &keep, self.cfg.keep_fibre_edges);
        let phi = phi.map(|p| p.iter().map(|v| old_ids.binary_search(v).expect("kept vertex survives")).collect());
        let mut it = maps.into_iter();
        (it.next().unwrap(), it.next().unwrap(), phi)
    }

    /// Satisfies `live` on the working graph, extending it if needed. Returns the witness and,
    /// when the graph grew, the map from the new working graph onto the old one.
    fn absorb(&self, live: &Live, work: &mut Work) -> Result<(GraphMap, Option<GraphMap>)> {
        let top_level = self.seq.len() - 1;
        let pins: Vec<(Vertex, Vertex)> = match (&work.phi, &live.psi) {
            (Some(p), Some(psi)) => p.iter().copied().zip(psi.iter().copied()).collect(),
            _ => Vec::new(),
        };
        let (to_work, leg, phi_new) = match &live.over {
            None => {
                if let Some(g) = Factorisation::plain(&live.target).on_graph(&work.graph, |w| w, &pins)? {
                    return Ok((g, None));
                }
                let (z, px, py) = product(&work.graph, &live.target);
                let nx = live.target.n();
                let phi = work.phi.as_ref().map(|p| {
                    let psi = live.psi.as_ref().expect("comma requirement carries psi");
                    p.iter().zip(psi).map(|(&a, &b)| a * nx + b).collect::<Vec<_>>()
                });
                self.prune(&z, px, py, phi)
            }
            Some((n, f)) => {
                let n = *n;
                let down: Vec<Vertex> = work.to_top.iter().map(|&t| self.seq.project(top_level, n, t)).collect();
                let fac = Factorisation::over(&live.target, n, f, None);
                if let Some(g) = fac.on_graph(&work.graph, |w| down[w], &pins)? {
                    return Ok((g, None));
                }
                let work_down = GraphMap::new_unchecked(work.graph.clone(), self.seq.level(n).clone(), down);
                let pb = pullback(f, &work_down)?;
                let phi = match (&work.phi, &live.psi) {
                    (Some(p), Some(psi)) => Some(
                        psi.iter()
                            .zip(p)
                            .map(|(&y, &w)| pb.index_of(y, w).expect("lift lies over the cospan"))
                            .collect::<Vec<_>>(),
                    ),
                    _ => None,
                };
                self.prune(&pb.apex, pb.right.clone(), pb.left.clone(), phi)
            }
        };
        work.to_top = to_work.assign().iter().map(|&w| work.to_top[w]).collect();
        work.graph = to_work.dom().clone();
        work.phi = phi_new;
        Ok((leg, Some(to_work)))
    }

    /// Appends one level that satisfies the head requirement and as many of the requirements
    /// queued behind it as fit within `batch_cap` vertices.
    fn extend(&mut self, head: usize, head_live: Live) -> Result<()> {
        let top = self.seq.top().clone();
        let mut work = Work {
            graph: top.clone(),
            to_top: top.vertices().collect(),
            phi: self.comma.as_ref().map(|c| c.phis.last().unwrap().clone()),
        };
        let mut done: Vec<(usize, GraphMap)> = Vec::new();
        let mut next = Some((head, head_live, true));
        while let Some((id, live, is_head)) = next.take() {
            let existing = if is_head { None } else { self.check_existing(&live)? };
            if let Some((k, g)) = existing {
                self.satisfy(id, k, &g);
            } else {
                let (leg, shrink) = self.absorb(&live, &mut work)?;
                if let Some(to_work) = shrink {
                    for (_, g) in done.iter_mut() {
                        *g = compose(g, &to_work)?;
                    }
                }
                done.push((id, leg));
            }
            if work.graph.n() < self.cfg.batch_cap {
                if let Some(&id) = self.queue.front() {
                    let g = group(&self.ledger[head].requirement);
                    if g.is_some() && group(&self.ledger[id].requirement) == g {
                        self.queue.pop_front();
                        self.mark_attempt(id);
                        next = Some((id, self.live(id), false));
                    }
                }
            }
        }
        let bond = GraphMap::new_unchecked(work.graph.clone(), top, work.to_top);
        self.seq.push(bond)?;
        if let (Some(c), Some(p)) = (&mut self.comma, work.phi) {
            c.phis.push(p);
        }
        let level = self.seq.len() - 1;
        let new_level = self.seq.level(level).clone();
        for (id, g) in done {
            self.satisfy(id, level, &rebase(&g, &new_level));
        }
        self.enqueue_absorb(level);
        Ok(())
    }
}

/// Absorption requirements over one level may share a new level.
fn group(r: &RequirementKind) -> Option<usize> {
    match r {
        RequirementKind::Universal { .. } => None,
        RequirementKind::Absorb { level, .. } => Some(*level),
    }
}

struct Work {
    graph: Arc<FiniteGraph>,
    to_top: Vec<Vertex>,
    phi: Option<Vec<Vertex>>,
}

fn rebase(m: &GraphMap, dom: &Arc<FiniteGraph>) -> GraphMap {
    GraphMap::new_unchecked(dom.clone(), m.cod().clone(), m.assign().to_vec())
}

fn all_maps(points: usize, n: usize) -> Vec<Vec<Vertex>> {
    product_of(&vec![(0..n).collect(); points])
}

fn product_of(choices: &[Vec<Vertex>]) -> Vec<Vec<Vertex>> {
    let mut out = vec![Vec::new()];
    for opts in choices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out
}

/// Builds a prefix of a universal sequence for plain graphs, starting from `seed`.
pub fn build_prefix(cfg: &BuildConfig, seed: &FiniteGraph) -> Result<BuildReport> {
    cfg.validate()?;
    if seed.n() > cfg.a_target_cap {
        return Err(Error::CapExceeded { what: "seed", n: seed.n(), cap: cfg.a_target_cap });
    }
    let mut b = Builder {
        cfg: cfg.clone(),
        seq: ProfiniteBase::new(Arc::new(seed.clone())),
        comma: None,
        ledger: Vec::new(),
        queue: VecDeque::new(),
        attempts: 0,
        unenumerated: Vec::new(),
        padded: Vec::new(),
    };
    b.enqueue_universal()?;
    b.enqueue_absorb(0);
    b.run()?;
    Ok(b.finish())
}

/// Builds a prefix of a universal sequence in the comma category over `base`. The finest listed
/// level of `base` stands in for `K`; the seed is mapped constantly to its vertex 0.
pub fn build_comma_prefix(cfg: &BuildConfig, base: &ProfiniteBase, seed: &FiniteGraph) -> Result<BuildReport> {
    cfg.validate()?;
    if seed.n() > cfg.a_target_cap {
        return Err(Error::CapExceeded { what: "seed", n: seed.n(), cap: cfg.a_target_cap });
    }
    let base_level = base.len() - 1;
    let points = base.level(base_level).n();
    let mut b = Builder {
        cfg: cfg.clone(),
        seq: ProfiniteBase::new(Arc::new(seed.clone())),
        comma: Some(CommaData { base: base.clone(), base_level, phis: vec![vec![0; points]] }),
        ledger: Vec::new(),
        queue: VecDeque::new(),
        attempts: 0,
        unenumerated: Vec::new(),
        padded: Vec::new(),
    };
    b.enqueue_universal()?;
    b.enqueue_absorb(0);
    b.run()?;
    Ok(b.finish())
}

impl Builder {
    fn finish(self) -> BuildReport {
        BuildReport {
            config: self.cfg,
            sequence: self.seq,
            comma: self.comma,
            ledger: self.ledger,
            unenumerated_levels: self.unenumerated,
            padded_levels: self.padded,
        }
    }
}

/// Replays one ledger entry: the stored witness must be a quotient satisfying its equation.
pub fn replay(report: &BuildReport, req: &Requirement) -> bool {
    let Status::Satisfied { level, witness } = &req.status else {
        return false;
    };
    let seq = &report.sequence;
    if *level >= seq.len() {
        return false;
    }
    let target = Arc::new(req.requirement.target().clone());
    let Ok(g) = GraphMap::new(seq.level(*level).clone(), target, witness.clone()) else {
        return false;
    };
    if !g.is_quotient() {
        return false;
    }
    if let RequirementKind::Absorb { level: n, assign, .. } = &req.requirement {
        if n > level {
            return false;
        }
        let ok = seq.level(*level).vertices().all(|w| assign[g.apply(w)] == seq.project(*level, *n, w));
        if !ok {
            return false;
        }
    }
    match (req.requirement.psi(), &report.comma) {
        (None, _) => true,
        (Some(psi), Some(c)) => c.phis[*level].iter().zip(psi).all(|(&v, &y)| g.apply(v) == y),
        (Some(_), None) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::enumerate_quotients;

    #[test]
    fn extensions_cover_all_single_merges() {
        // every quotient from a graph one vertex larger is, up to relabeling of the source, one
        // of the generated extensions
        for g in (1..=3).flat_map(|n| enumerate_graphs(n).unwrap()) {
            let g = Arc::new(g);
            let exts = single_merge_extensions(&g);
            let mut seen = BTreeSet::new();
            for y in enumerate_graphs(g.n() + 1).unwrap() {
                let y = Arc::new(y);
                for f in enumerate_quotients(&y, &g).unwrap() {
                    let hit = exts.iter().position(|e| {
                        crate::graph::are_isomorphic(e.dom(), &y).unwrap() && same_up_to_source_relabeling(e, &f)
                    });
                    let hit = hit.unwrap_or_else(|| panic!("{f:?} onto {g:?} not covered"));
                    seen.insert(hit);
                }
            }
            assert_eq!(seen.len(), exts.len(), "duplicates among extensions of {g:?}");
        }
    }

    fn same_up_to_source_relabeling(a: &GraphMap, b: &GraphMap) -> bool {
        let n = a.dom().n();
        let mut perm: Vec<usize> = (0..n).collect();
        // brute force over relabelings of the source, n ≤ 4
        fn next(p: &mut [usize]) -> bool {
            let n = p.len();
            if n < 2 {
                return false;
            }
            let mut i = n - 1;
            while i > 0 && p[i - 1] >= p[i] {
                i -= 1;
            }
            if i == 0 {
                return false;
            }
            let mut j = n - 1;
            while p[j] <= p[i - 1] {
                j -= 1;
            }
            p.swap(i - 1, j);
            p[i..].reverse();
            true
        }
        loop {
            if a.dom().permute(&perm) == **b.dom() && (0..n).all(|v| b.apply(perm[v]) == a.apply(v)) {
                return true;
            }
            if !next(&mut perm) {
                return false;
            }
        }
    }

    #[test]
    fn depth_one_from_terminal() {
        let r = build_prefix(&BuildConfig::new(1, 1), &FiniteGraph::singleton()).unwrap();
        assert_eq!(r.sequence.len(), 1);
        let satisfied: Vec<_> = r.ledger.iter().filter(|q| q.is_satisfied()).collect();
        assert!(satisfied.iter().any(|q| matches!(q.requirement, RequirementKind::Universal { .. })));
        assert!(r.ledger.iter().filter(|q| matches!(q.requirement, RequirementKind::Universal { .. })).count() == 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let e = FiniteGraph::single_edge();
        assert!(build_prefix(&BuildConfig::new(3, 0), &e).is_err());
        let cfg = BuildConfig { a_slack: 2, ..Default::default() };
        assert!(build_prefix(&cfg, &e).is_err());
        assert!(build_prefix(&BuildConfig::new(3, 2), &FiniteGraph::discrete(9).unwrap()).is_err());
    }

    #[test]
    fn verify_on_trivial_targets() {
        let r = build_prefix(&BuildConfig::new(2, 3), &FiniteGraph::single_edge()).unwrap();
        let pt = Arc::new(FiniteGraph::singleton());
        let (n, g) = verify_u(&r.sequence, &pt).unwrap().unwrap();
        assert_eq!(n, 0);
        assert_eq!(g.assign(), &[0, 0]);
        let (n, g) = verify_u(&r.sequence, r.sequence.level(0)).unwrap().unwrap();
        assert_eq!((n, g.assign()), (0, &[0usize, 1][..]));
        let id = GraphMap::identity(r.sequence.level(1).clone());
        let (k, g) = verify_a(&r.sequence, 1, &id).unwrap().unwrap();
        assert_eq!((k, &g), (1, &id));
        let bond = r.sequence.bonds()[0].clone();
        let (k, _) = verify_a(&r.sequence, 0, &bond).unwrap().unwrap();
        assert!(k <= 1);
    }

    #[test]
    fn ledger_replays() {
        let r = build_prefix(&BuildConfig::new(2, 4), &FiniteGraph::single_edge()).unwrap();
        for q in r.ledger.iter().filter(|q| q.is_satisfied()) {
            assert!(replay(&r, q), "{q:?}");
        }
    }
}
