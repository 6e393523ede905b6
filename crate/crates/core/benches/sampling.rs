use bqp::bmc::{sample_bmc_from, SamplerCaps};
use bqp::model::reference::model_a;
use bqp::replicas::{fold_replicas, Workers};
use bqp::verify::suites::decorated_spine_pmf;
use bqp::StateSet;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const CAPS: SamplerCaps = SamplerCaps {
    max_generations: 10_000,
    max_population: 1_000_000,
};

fn workers() -> [(&'static str, Workers); 2] {
    [("sequential", Workers::SINGLE), ("parallel", Workers(0))]
}

fn plain_trees(c: &mut Criterion) {
    let a = model_a();
    let mut g = c.benchmark_group("plain_bmc_population");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |bch, &w| {
            bch.iter(|| {
                fold_replicas(
                    100_000,
                    black_box(1),
                    w,
                    || 0usize,
                    |acc, _, rng| *acc += sample_bmc_from(&a, 1, rng, CAPS).len(),
                    |acc, p| *acc += p,
                )
            })
        });
    }
    g.finish();
}

fn spine_pmf(c: &mut Criterion) {
    let a = model_a();
    let ht = a.h_transform(&StateSet::new(3, [0]).unwrap()).unwrap();
    let mut g = c.benchmark_group("decorated_spine_pmf");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |bch, &w| {
            bch.iter(|| decorated_spine_pmf(&a, &ht, 1, 2, 50_000, black_box(2), w, CAPS))
        });
    }
    g.finish();
}

criterion_group!(benches, plain_trees, spine_pmf);
criterion_main!(benches);
