use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pathcalc::integral::riemann_path;
use pathcalc::partition::lebesgue_partition;
use pathcalc::quadvar::{qv_curve, qv_sequence};
use pathcalc::{generate, Generator, GridPath, Partition, PartitionSequence, TimeGrid};

fn brownian(level: u32) -> GridPath {
    let grid = Arc::new(TimeGrid::dyadic(1.0, level).unwrap());
    generate(&Generator::DyadicBrownian { seed: 1, sigma: 1.0, x0: 0.0 }, &grid).unwrap()
}

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("qv_curve");
    for level in [12, 16] {
        let x = brownian(level);
        let p = Partition::whole_grid(x.grid().clone());
        g.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, _| {
            b.iter(|| qv_curve(black_box(&x), &p))
        });
    }
    g.finish();

    let x = brownian(14);
    let seq = PartitionSequence::dyadic(x.grid(), 1, 14).unwrap();
    c.bench_function("qv_sequence/14", |b| b.iter(|| qv_sequence(black_box(&x), &seq).unwrap()));

    let xi = x.map(|v| v * v).unwrap();
    let p = Partition::dyadic(x.grid().clone(), 10).unwrap();
    c.bench_function("riemann_path/14", |b| {
        b.iter(|| riemann_path(black_box(&xi), &x, &p).unwrap())
    });

    let mut g = c.benchmark_group("lebesgue_partition");
    for n in [4, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| lebesgue_partition(black_box(&x), n).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
