//! Acceptance battery: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fraisse_core::category::{pullback, ProfiniteBase};
use fraisse_core::fraisse::{
    build_comma_prefix, build_prefix, replay, verify_a, verify_u, BuildConfig, BuildReport, Status,
};
use fraisse_core::io::Artifact;
use fraisse_core::kr::{extend_isomorphism, lift, verify_tower, Direction, LiftCase, LiftInstance, Side, SquareTower};
use fraisse_core::limit::{embedding_report, find_edge_in_clopen, separate, Clopen};
use fraisse_core::{
    compose, elementary_decompose, enumerate_graphs, enumerate_quotients, FiniteGraph, GraphMap, Vertex,
};

const SEARCH_DEPTH: usize = 7;

// ---------------------------------------------------------------- oracles

/// Surjective edge-preserving map with an edge over every target edge.
fn quotient_oracle(dom: &FiniteGraph, cod: &FiniteGraph, f: &[Vertex]) -> bool {
    if f.len() != dom.n() || f.iter().any(|&y| y >= cod.n()) {
        return false;
    }
    let image: BTreeSet<Vertex> = f.iter().copied().collect();
    if image.len() != cod.n() {
        return false;
    }
    let pairs = || (0..dom.n()).flat_map(|a| (a + 1..dom.n()).map(move |b| (a, b)));
    let preserves = pairs().filter(|&(a, b)| dom.adjacent(a, b)).all(|(a, b)| f[a] == f[b] || cod.adjacent(f[a], f[b]));
    let strict = (0..cod.n())
        .flat_map(|p| (p + 1..cod.n()).map(move |q| (p, q)))
        .filter(|&(p, q)| cod.adjacent(p, q))
        .all(|(p, q)| pairs().any(|(a, b)| dom.adjacent(a, b) && ((f[a], f[b]) == (p, q) || (f[a], f[b]) == (q, p))));
    preserves && strict
}

fn map_oracle(m: &GraphMap) -> bool {
    quotient_oracle(m.dom(), m.cod(), m.assign())
}

/// Lexicographically least sorted edge list over all relabellings.
fn brute_canon(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    (0..n)
        .permutations(n)
        .map(|p| {
            let mut e: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b]))).collect();
            e.sort_unstable();
            e
        })
        .min()
        .unwrap()
}

fn edge_list(g: &FiniteGraph) -> Vec<(usize, usize)> {
    (0..g.n()).flat_map(|a| (a + 1..g.n()).map(move |b| (a, b))).filter(|&(a, b)| g.adjacent(a, b)).collect()
}

fn graphs_up_to(n: usize) -> Vec<Arc<FiniteGraph>> {
    (1..=n).flat_map(|k| enumerate_graphs(k).unwrap()).map(Arc::new).collect()
}

fn plain_build() -> BuildReport {
    build_prefix(&BuildConfig::new(3, 8), &FiniteGraph::single_edge()).unwrap()
}

fn two_points() -> ProfiniteBase {
    ProfiniteBase::new(Arc::new(FiniteGraph::discrete(2).unwrap()))
}

fn comma_build(size_cap: usize) -> BuildReport {
    build_comma_prefix(&BuildConfig::new(size_cap, 8), &two_points(), &FiniteGraph::single_edge()).unwrap()
}

fn tower() -> SquareTower {
    extend_isomorphism(&comma_build(3), &comma_build(2), &[1, 0], SEARCH_DEPTH, 5).unwrap()
}

// ---------------------------------------------------------------- criteria

fn c1_enumeration() -> Result<String, String> {
    let mut counts = Vec::new();
    for n in 1..=4usize {
        let all: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let mut buckets = BTreeSet::new();
        for mask in 0u32..1 << all.len() {
            let e: Vec<_> = all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p).collect();
            buckets.insert(brute_canon(n, &e));
        }
        let lib = enumerate_graphs(n).unwrap();
        let hit: BTreeSet<_> = lib.iter().map(|g| brute_canon(n, &edge_list(g))).collect();
        if hit.len() != lib.len() || hit != buckets {
            return Err(format!("n={n}: library {} classes, oracle {}", lib.len(), buckets.len()));
        }
        counts.push(lib.len());
    }
    if counts != [1, 2, 4, 11] {
        return Err(format!("counts {counts:?}"));
    }
    Ok(format!("counts {counts:?} match bucketing oracle"))
}

fn c2_quotient_algebra() -> Result<String, String> {
    let gs = graphs_up_to(4);
    let mut quotients = Vec::new();
    for x in &gs {
        for y in gs.iter().filter(|y| y.n() <= x.n()) {
            for q in enumerate_quotients(x, y).unwrap() {
                if !map_oracle(&q) {
                    return Err(format!("enumerated non-quotient {q:?}"));
                }
                let d = elementary_decompose(&q).map_err(|e| e.to_string())?;
                if d.recompose().assign() != q.assign() || d.merges.len() != x.n() - y.n() {
                    return Err(format!("decomposition of {q:?} does not recompose"));
                }
                if !d.merges.iter().all(map_oracle) || !map_oracle(&d.residual) {
                    return Err(format!("decomposition factor of {q:?} is not a quotient"));
                }
                quotients.push(q);
            }
        }
    }
    let mut composites = 0;
    for a in &quotients {
        for b in quotients.iter().filter(|b| b.dom() == a.cod()) {
            let c = compose(b, a).map_err(|e| e.to_string())?;
            if !c.classify().quotient || !map_oracle(&c) {
                return Err(format!("composite {c:?} not a quotient"));
            }
            composites += 1;
        }
    }
    Ok(format!("{} quotients decomposed, {composites} composites classified", quotients.len()))
}

fn c3_amalgamation() -> Result<String, String> {
    let small = graphs_up_to(3);
    let mut squares = 0;
    for z in small.iter().filter(|z| z.n() <= 2) {
        let legs: Vec<GraphMap> = small.iter().flat_map(|x| enumerate_quotients(x, z).unwrap()).collect();
        for q1 in &legs {
            for q2 in &legs {
                let p = pullback(q1, q2).map_err(|e| e.to_string())?;
                if !map_oracle(&p.left) || !map_oracle(&p.right) {
                    return Err(format!("projection not a quotient over {q1:?}, {q2:?}"));
                }
                if p.apex.vertices().any(|w| q1.apply(p.left.apply(w)) != q2.apply(p.right.apply(w))) {
                    return Err(format!("square does not commute over {q1:?}, {q2:?}"));
                }
                squares += 1;
            }
        }
    }
    Ok(format!("{squares} cospans amalgamated"))
}

fn c4_prefix() -> Result<String, String> {
    let r = plain_build();
    let seq = &r.sequence;
    let pending: Vec<usize> = r.pending().map(|q| q.id).collect();
    let targets = graphs_up_to(3);
    if targets.len() != 7 {
        return Err(format!("{} targets", targets.len()));
    }
    for x in &targets {
        match verify_u(seq, x).map_err(|e| e.to_string())? {
            Some((k, g)) if g.dom() == seq.level(k) && map_oracle(&g) => {}
            _ => return Err(format!("(U) fails for {x:?}")),
        }
    }
    let mut absorbed = 0;
    for n in 0..=2 {
        let u = seq.level(n);
        for y in [u.n(), u.n() + 1].into_iter().flat_map(|k| enumerate_graphs(k).unwrap()).map(Arc::new) {
            for f in enumerate_quotients(&y, u).unwrap() {
                match verify_a(seq, n, &f).map_err(|e| e.to_string())? {
                    Some((k, g))
                        if map_oracle(&g)
                            && seq.level(k).vertices().all(|w| f.apply(g.apply(w)) == seq.project(k, n, w)) =>
                    {
                        absorbed += 1
                    }
                    _ => return Err(format!("(A) fails at level {n} for {f:?}")),
                }
            }
        }
    }
    for q in &r.ledger {
        if let Status::Satisfied { level, witness } = &q.status {
            let ok = replay(&r, q) && quotient_oracle(seq.level(*level), q.requirement.target(), witness);
            if !ok {
                return Err(format!("ledger entry {} does not re-verify", q.id));
            }
        }
    }
    if !pending.is_empty() {
        return Err(format!("pending requirements {pending:?}"));
    }
    Ok(format!("7 (U) targets, {absorbed} (A) instances, {} ledger entries replayed, 0 pending", r.ledger.len()))
}

fn c5_edges_in_cylinders() -> Result<String, String> {
    let r = plain_build();
    let seq = &r.sequence;
    let mut found = 0;
    for n in 0..=2 {
        for v in seq.level(n).vertices() {
            let w = Clopen::cylinder(seq, n, v).unwrap();
            if w.complement(seq).is_empty() {
                continue;
            }
            let e = find_edge_in_clopen(seq, &w, SEARCH_DEPTH).map_err(|e| format!("level {n} vertex {v}: {e}"))?;
            let (a, b) = e.pair;
            let inside = seq.project(e.level, n, a) == v && seq.project(e.level, n, b) == v;
            if e.level > SEARCH_DEPTH || a == b || !seq.level(e.level).adjacent(a, b) || !inside {
                return Err(format!("bad witness {e:?} for level {n} vertex {v}"));
            }
            found += 1;
        }
    }
    Ok(format!("{found} cylinders each contain a witnessed edge"))
}

fn c6_separation() -> Result<String, String> {
    let r = plain_build();
    let seq = &r.sequence;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9a);
    let mut done = 0;
    while done < 50 {
        let n = rng.gen_range(0..=2);
        let g = seq.level(n);
        let a: BTreeSet<Vertex> = g.vertices().filter(|_| rng.gen_bool(0.4)).collect();
        let room: Vec<Vertex> =
            g.vertices().filter(|&v| !a.contains(&v) && a.iter().all(|&x| !g.adjacent(x, v))).collect();
        let b: BTreeSet<Vertex> = room.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let (ca, cb) = (Clopen::new(seq, n, a.clone()).unwrap(), Clopen::new(seq, n, b.clone()).unwrap());
        let s = separate(seq, &ca, &cb, SEARCH_DEPTH).map_err(|e| format!("A={a:?} B={b:?} at {n}: {e}"))?;
        let m = s.level;
        let lvl = seq.level(m);
        let (wa, wb) = (&s.w_a.members, &s.w_b.members);
        let partition = s.w_a.level == m && s.w_b.level == m && wa.is_disjoint(wb) && wa.len() + wb.len() == lvl.n();
        let cross =
            lvl.vertices().any(|x| lvl.vertices().any(|y| wa.contains(&x) && wb.contains(&y) && lvl.adjacent(x, y)));
        let covers = lvl.vertices().all(|w| {
            let d = seq.project(m, n, w);
            (!a.contains(&d) || wa.contains(&w)) && (!b.contains(&d) || wb.contains(&w))
        });
        if m < n || !partition || cross || !covers {
            return Err(format!("bad separation of A={a:?} B={b:?} at level {n}"));
        }
        done += 1;
    }
    Ok("50 random instances separated with zero cross edges".into())
}

fn c7_embedding() -> Result<String, String> {
    let r = comma_build(3);
    let e = embedding_report(&r, r.sequence.len() - 1).map_err(|e| e.to_string())?;
    let comma = r.comma.as_ref().unwrap();
    if e.isolated.len() != 1 || !e.isolated_image() {
        return Err(format!("isolation unwitnessed: {:?}", e.isolated));
    }
    for w in &e.isolated {
        let k = w.level.unwrap();
        let (p, q) = (comma.phis[k][w.points.0], comma.phis[k][w.points.1]);
        if p == q || r.sequence.level(k).adjacent(p, q) {
            return Err(format!("isolation witness {w:?} is wrong"));
        }
    }
    let expected: usize = (0..=3).map(|n| r.sequence.level(n).n()).sum();
    let audited = e.nowhere_dense.iter().filter(|w| w.level <= 3).count();
    if audited != expected || !e.nowhere_dense_up_to(3) {
        return Err("nowhere density unwitnessed at levels up to 3".into());
    }
    for w in e.nowhere_dense.iter().filter(|w| w.level <= 3) {
        let (m, x) = w.witness.unwrap();
        if r.sequence.project(m, w.level, x) != w.vertex || comma.phis[m].contains(&x) {
            return Err(format!("nowhere density witness {w:?} is wrong"));
        }
    }
    let first = e.injective_from.ok_or("phi never injective")?;
    let levels: Vec<usize> = e.retractions.iter().map(|t| t.level).collect();
    if levels != (first..r.sequence.len()).collect::<Vec<_>>() {
        return Err(format!("retractions at {levels:?}, injective from {first}"));
    }
    let k = FiniteGraph::discrete(2).unwrap();
    for t in &e.retractions {
        let u = r.sequence.level(t.level);
        if !quotient_oracle(u, &k, &t.assign) || (0..2).any(|x| t.assign[comma.phis[t.level][x]] != x) {
            return Err(format!("retraction at level {} fails", t.level));
        }
    }
    Ok(format!("isolated, nowhere dense to level 3, retractions at levels {levels:?}"))
}

fn c8_lifting() -> Result<String, String> {
    let r = comma_build(3);
    let s = Side::of(&r).unwrap();
    let seq = &s.sequence;
    let (mut total, mut disjoint, mut adjacent) = (0, 0, 0);
    for x in graphs_up_to(3) {
        let top = x.n();
        let pairs: Vec<(Vertex, Vertex)> = (0..=top).tuple_combinations().collect();
        // every labelled y on |x|+1 vertices, merging the new vertex `top` into `a`
        for (a, mask) in (0..top).cartesian_product(0u32..1 << pairs.len()) {
            let e = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p);
            let y = Arc::new(FiniteGraph::new(top + 1, e).unwrap());
            let assign: Vec<Vertex> = (0..=top).map(|v| if v == top { a } else { v }).collect();
            if !quotient_oracle(&y, &x, &assign) {
                continue;
            }
            let f = GraphMap::new(y.clone(), x.clone(), assign).unwrap();
            for n in 0..=2 {
                let u = seq.level(n);
                for g in enumerate_quotients(u, &x).unwrap() {
                    let phi = s.phi(n).to_vec();
                    let choices: Vec<Vec<Vertex>> = phi.iter().map(|&p| f.preimage(g.apply(p))).collect();
                    for bs in choices.iter().multi_cartesian_product() {
                        let bs: Vec<Vertex> = bs.into_iter().copied().collect();
                        let inst = LiftInstance::new(&s, f.clone(), n, g.clone(), bs.clone()).unwrap();
                        let l = lift(&s, &inst, SEARCH_DEPTH)
                            .map_err(|e| format!("n={n} f={f:?} g={g:?} b={bs:?}: {e}"))?;
                        let h = &l.h;
                        let m = l.level;
                        let over =
                            seq.level(m).vertices().all(|w| f.apply(h.apply(w)) == g.apply(seq.project(m, n, w)));
                        let base = (0..bs.len()).all(|i| h.apply(s.phi(m)[i]) == bs[i]);
                        if m < n || h.dom() != seq.level(m) || !map_oracle(h) || !over || !base {
                            return Err(format!("lift fails its equations: n={n} f={f:?} b={bs:?}"));
                        }
                        let merged_adjacent = y.adjacent(a, top);
                        match (l.case, merged_adjacent) {
                            (LiftCase::Disjoint, false) => disjoint += 1,
                            (LiftCase::Adjacent, true) => adjacent += 1,
                            _ => {
                                return Err(format!(
                                    "case {:?} reported for merged pair adjacent={merged_adjacent}",
                                    l.case
                                ))
                            }
                        }
                        total += 1;
                    }
                }
            }
        }
    }
    if disjoint == 0 || adjacent == 0 {
        return Err(format!("case counters {disjoint}/{adjacent}"));
    }
    Ok(format!("{total} lifts verified (disjoint {disjoint}, adjacent {adjacent})"))
}

fn c9_back_and_forth() -> Result<String, String> {
    let t = tower();
    let audit = verify_tower(&t);
    if t.height() < 3 || !audit.passed() {
        return Err(format!("height {}, audit {audit:?}, unmet {:?}", t.height(), t.unmet));
    }
    let h = [1usize, 0];
    for (i, rung) in t.rungs.iter().enumerate() {
        let (src, dst) = match rung.direction {
            Direction::LeftToRight => (&t.left, &t.right),
            Direction::RightToLeft => (&t.right, &t.left),
        };
        let (ps, pt) = (src.phi(rung.source_level), dst.phi(rung.target_level));
        let map = t.rung_map(i).map_err(|e| e.to_string())?;
        if !map_oracle(&map) {
            return Err(format!("rung {i} is not a quotient"));
        }
        // h is an involution, so both directions carry base point x to h(x)
        if (0..2).any(|x| rung.assign[ps[x]] != pt[h[x]]) {
            return Err(format!("rung {i} does not reproduce h on base classes"));
        }
        if i > 0 {
            let prev = &t.rungs[i - 1];
            let seq = &src.sequence;
            let bond = seq
                .level(rung.source_level)
                .vertices()
                .all(|w| prev.assign[rung.assign[w]] == seq.project(rung.source_level, prev.target_level, w));
            if prev.source_level != rung.target_level || !bond {
                return Err(format!("rungs {} and {i} do not compose to a bond", i - 1));
            }
        }
    }
    Ok(format!("tower height {} over independent prefixes, full audit pass", t.height()))
}

fn c10_determinism() -> Result<String, String> {
    let cfg = BuildConfig::new(3, 8);
    let build = || Artifact::seal("build", &cfg, plain_build()).unwrap().to_json().unwrap();
    let extend = || {
        Artifact::seal("extend", &serde_json::json!({"h": [1, 0], "height": 5}), tower()).unwrap().to_json().unwrap()
    };
    let (b1, b2) = (build(), build());
    let (t1, t2) = (extend(), extend());
    if b1 != b2 || t1 != t2 {
        return Err("repeated runs differ".into());
    }
    let back: Artifact<BuildReport> = Artifact::from_json(&b1).map_err(|e| e.to_string())?;
    if back.to_json().unwrap() != b1 || !back.hash_matches().unwrap() {
        return Err("build artifact does not round-trip".into());
    }
    let back: Artifact<SquareTower> = Artifact::from_json(&t1).map_err(|e| e.to_string())?;
    if back.to_json().unwrap() != t1 {
        return Err("tower artifact does not round-trip".into());
    }
    Ok(format!("build {} bytes and tower {} bytes identical across runs", b1.len(), t1.len()))
}

type Criterion = fn() -> Result<String, String>;

fn main() {
    let criteria: [(usize, &str, Criterion, u64); 10] = [
        (1, "enumeration", c1_enumeration, 5),
        (2, "quotient algebra", c2_quotient_algebra, 60),
        (3, "amalgamation", c3_amalgamation, 120),
        (4, "universal prefix", c4_prefix, 300),
        (5, "edges in cylinders", c5_edges_in_cylinders, 300),
        (6, "separation", c6_separation, 300),
        (7, "embedding report", c7_embedding, 300),
        (8, "lifting", c8_lifting, 600),
        (9, "back and forth", c9_back_and_forth, 600),
        (10, "determinism", c10_determinism, 600),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let took = t.elapsed();
        let outcome = match outcome {
            Ok(_) if took > Duration::from_secs(limit) => Err(format!("took {took:.1?}, limit {limit} s")),
            o => o,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {id:>2} {name}: {msg} [{took:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {id:>2} {name}: {msg} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
