use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use selfish_bench::{model, params};
use selfish_core::chain::{build_truncated, BoundaryMode};
use selfish_core::{find_optimal, OptimizeConfig, RelativeValueIteration};
use std::hint::black_box;

fn rvi(c: &mut Criterion) {
    let mut group = c.benchmark_group("rvi");
    for t in [20u32, 40, 75] {
        let m = model(t);
        let scalar = build_truncated(&m, BoundaryMode::UnderPaying, 0.4).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(t), &scalar, |b, scalar| {
            let mut solver = RelativeValueIteration::new();
            b.iter(|| solver.solve(black_box(scalar), 1e-6, 1_000_000).unwrap().gain)
        });
    }
    group.finish();
}

fn optimize(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_optimal");
    group.sample_size(10);
    let cfg = OptimizeConfig::new(params(), 25);
    group.bench_function("T=25", |b| b.iter(|| find_optimal(black_box(&cfg)).unwrap().lower_bound));
    group.finish();
}

criterion_group!(benches, rvi, optimize);
criterion_main!(benches);
