use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use selfish_bench::params;
use selfish_core::{simulate_policy, Policy, SimConfig};
use std::hint::black_box;

const ROUNDS: u64 = 100_000;

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.throughput(Throughput::Elements(ROUNDS));
    for (name, pi) in [("honest", Policy::honest(75).unwrap()), ("sm1", Policy::sm1(75).unwrap())] {
        let cfg = SimConfig::new(params(), pi, ROUNDS, 7);
        group.bench_function(name, |b| b.iter(|| simulate_policy(black_box(&cfg)).unwrap().rev));
    }
    group.finish();
}

criterion_group!(benches, simulate);
criterion_main!(benches);
