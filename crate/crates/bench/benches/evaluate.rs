use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use selfish_bench::{model, params};
use selfish_core::{build_base_model, evaluate_policy_exact, Policy};
use std::hint::black_box;

fn build(c: &mut Criterion) {
    let p = params();
    c.bench_function("build_base_model T=75", |b| b.iter(|| build_base_model(black_box(&p), 75).unwrap()));
}

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_exact_sm1");
    for t in [25u32, 75, 150] {
        let m = model(t);
        let pi = Policy::sm1(t).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(t), &pi, |b, pi| {
            b.iter(|| evaluate_policy_exact(&m, black_box(pi)).unwrap().rev)
        });
    }
    group.finish();
}

criterion_group!(benches, build, exact);
criterion_main!(benches);
