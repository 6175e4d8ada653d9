use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fraisse_core::category::ProfiniteBase;
use fraisse_core::fraisse::{build_comma_prefix, build_prefix, single_merge_extensions, verify_a, BuildConfig};
use fraisse_core::kr::{lift, LiftInstance, Side};
use fraisse_core::par::{self, Sweep};
use fraisse_core::{enumerate_graphs, enumerate_quotients, FiniteGraph, GraphMap};

const MODES: [(&str, Sweep); 2] = [("sequential", Sweep::Sequential), ("parallel", Sweep::Parallel)];

fn absorption(c: &mut Criterion) {
    let seq = build_prefix(&BuildConfig::new(3, 8), &FiniteGraph::single_edge()).unwrap().sequence;
    let mut jobs: Vec<(usize, GraphMap)> = Vec::new();
    for n in 0..=2 {
        let u = seq.level(n);
        for y in enumerate_graphs(u.n() + 1).unwrap().into_iter().map(Arc::new) {
            jobs.extend(enumerate_quotients(&y, u).unwrap().into_iter().map(|f| (n, f)));
        }
    }
    let mut group = c.benchmark_group("absorption_battery");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| par::all(mode, &jobs, |(n, f)| verify_a(&seq, *n, f).unwrap().is_some()))
        });
    }
    group.finish();
}

fn lifting(c: &mut Criterion) {
    let base = ProfiniteBase::new(Arc::new(FiniteGraph::discrete(2).unwrap()));
    let r = build_comma_prefix(&BuildConfig::new(3, 8), &base, &FiniteGraph::single_edge()).unwrap();
    let side = Side::of(&r).unwrap();
    let mut jobs = Vec::new();
    for x in (1..=3).flat_map(|k| enumerate_graphs(k).unwrap()).map(Arc::new) {
        for f in single_merge_extensions(&x) {
            for n in 0..=2 {
                for g in enumerate_quotients(side.sequence.level(n), &x).unwrap() {
                    let phi = side.phi(n);
                    for b0 in f.preimage(g.apply(phi[0])) {
                        for b1 in f.preimage(g.apply(phi[1])) {
                            jobs.push(LiftInstance::new(&side, f.clone(), n, g.clone(), vec![b0, b1]).unwrap());
                        }
                    }
                }
            }
        }
    }
    let mut group = c.benchmark_group("lift_battery");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| par::all(mode, &jobs, |inst| lift(&side, inst, 7).is_ok()))
        });
    }
    group.finish();
}

criterion_group!(benches, absorption, lifting);
criterion_main!(benches);
