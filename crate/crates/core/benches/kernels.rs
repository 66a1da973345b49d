//! Hot kernels under the default rayon pool and under a one-thread pool.
//!
//! `cargo bench -p morawetz-lab` compares the two pools. Building with
//! `--no-default-features` swaps rayon for plain iterators; the group names
//! carry `par::MODE` so both runs can be told apart in the criterion report.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use morawetz_lab::morawetz::{MorawetzWeight, VirialContext};
use morawetz_lab::propagator::Stepper;
use morawetz_lab::spectral::fft_roundtrip;
use morawetz_lab::{par, ComplexField, Grid, PotentialSpec, Snapshot};
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let default = ThreadPoolBuilder::new().build().expect("default pool");
    let single = ThreadPoolBuilder::new().num_threads(1).build().expect("single pool");
    vec![("pool-default", default), ("pool-1", single)]
}

fn field(dim: usize, n: usize) -> ComplexField {
    let grid = Grid::new(dim, n, 16.0).unwrap();
    ComplexField::gaussian(grid, 1.0, 1.5, [0.5, 0.0, 0.0], [1.0, 0.5, 0.0])
}

fn bench_kernels(c: &mut Criterion) {
    let pools = pools();
    let u = field(3, 64);
    let grid = *u.grid();
    let spec = PotentialSpec::symmetric_pair(3, 3.0, 1.0, 1.0, 2.0).unwrap();
    let stepper = Stepper::new(grid, Some(&spec), 2.0, 1.0, 1e-2);
    let weight = MorawetzWeight::new(3, 32.0).unwrap();
    let ctx = VirialContext::new(&grid, weight, Some(&spec), 2.0, 1.0).unwrap();
    let snap = Snapshot { time: 0.0, field: u.clone() };

    let mut g = c.benchmark_group(format!("kernels-{}", par::MODE));
    g.sample_size(10);
    for (label, pool) in &pools {
        g.bench_function(BenchmarkId::new("fft_roundtrip_64^3", label), |b| {
            pool.install(|| b.iter(|| fft_roundtrip(black_box(&u)).unwrap()))
        });
        g.bench_function(BenchmarkId::new("strang_step_64^3", label), |b| {
            let mut w = u.clone();
            pool.install(|| b.iter(|| stepper.advance(black_box(&mut w), 1).unwrap()))
        });
        g.bench_function(BenchmarkId::new("virial_record_64^3", label), |b| {
            pool.install(|| b.iter(|| ctx.record(black_box(&snap)).unwrap()))
        });
        g.bench_function(BenchmarkId::new("weight_sample_64^3", label), |b| {
            pool.install(|| b.iter(|| weight.sample(black_box(&grid))))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_kernels);
criterion_main!(benches);
