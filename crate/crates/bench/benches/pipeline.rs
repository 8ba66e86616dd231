use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robin_eit::imaging::{lsm_indicator_with, rfm_indicator};
use robin_eit::{assemble_operator, decompose, BoundaryGrid, FilterSpec, ImagingGrid, KernelSpec};
use robin_eit_bench::{reference_medium, reference_operator};

fn assemble(c: &mut Criterion) {
    let medium = reference_medium();
    let mut group = c.benchmark_group("assemble");
    for n in [32, 64, 128] {
        let grid = BoundaryGrid::new(n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, grid| {
            b.iter(|| assemble_operator(black_box(&medium), grid, KernelSpec::default()).unwrap())
        });
    }
    group.finish();
}

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for n in [32, 64, 128] {
        let op = reference_operator(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &op, |b, op| {
            b.iter(|| decompose(black_box(op)).unwrap())
        });
    }
    group.finish();
}

fn indicators(c: &mut Criterion) {
    let sys = decompose(&reference_operator(32)).unwrap();
    let grid = ImagingGrid::new(41, 0.95).unwrap();
    let mut group = c.benchmark_group("indicator_41x41");
    group.sample_size(10);
    for spec in [FilterSpec::Tikhonov { alpha: 1e-9 }, FilterSpec::Ttls { k: 5 }] {
        group.bench_function(format!("lsm/{spec}"), |b| {
            b.iter(|| lsm_indicator_with(&sys, &grid, 1.0, spec).unwrap())
        });
        group.bench_function(format!("rfm/{spec}"), |b| {
            b.iter(|| rfm_indicator(&sys, &grid, 1.0, spec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assemble, svd, indicators);
criterion_main!(benches);
