use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use semapair_bench::fixture;
use semapair_core::feasibility::static_prune;
use semapair_core::{run_scheme, Scheme, SolveOptions};

fn full_solve(c: &mut Criterion) {
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in [6, 10, 16] {
        let (sc, prof) = fixture(n, 7);
        for scheme in [Scheme::Proposed, Scheme::EqualAllocation] {
            group.bench_with_input(BenchmarkId::new(scheme.name(), n), &n, |b, _| {
                b.iter(|| run_scheme(scheme, black_box(&sc), &prof, 1.5, &opts))
            });
        }
    }
    group.finish();
}

fn pruning(c: &mut Criterion) {
    let (sc, prof) = fixture(16, 7);
    c.bench_function("prune/16", |b| b.iter(|| static_prune(black_box(&sc), &prof)));
}

criterion_group!(benches, full_solve, pruning);
criterion_main!(benches);
