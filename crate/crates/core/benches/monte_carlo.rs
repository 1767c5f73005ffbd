use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sensopt_core::optimizer::rate_curve;
use sensopt_core::*;

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn slot_batches(c: &mut Criterion) {
    let scn = Scenario::default();
    let mut g = c.benchmark_group("simulate_batch_200k");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                simulate_batch(
                    &scn,
                    black_box(0.012),
                    DecisionMode::ClosedForm,
                    200_000,
                    7,
                    exec,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let scn = Scenario::default();
    let mut g = c.benchmark_group("rate_curve_10k");
    for (name, exec) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| rate_curve(&scn, 1e-4, 0.0999, black_box(10_000), None, exec).unwrap())
        });
    }
    g.finish();
}

fn optimizer(c: &mut Criterion) {
    let scn = Scenario::default();
    let mut g = c.benchmark_group("optimize_tau");
    for (name, exec) in STRATEGIES {
        let opts = SearchOptions {
            exec,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| optimizer::optimize_tau_with(black_box(&scn), None, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, slot_batches, sweeps, optimizer);
criterion_main!(benches);
