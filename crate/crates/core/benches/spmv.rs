use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gql::build::{standard_normal_vector, synthetic_spd, SyntheticSpec};
use gql::matrix::IndexSet;
use std::hint::black_box;

fn spmv(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmv");
    for &(n, density) in &[(2000usize, 1e-2), (5000, 1e-2)] {
        let a = synthetic_spd(&SyntheticSpec { n, density, lam1: 1e-2, seed: 1 }).unwrap().matrix;
        let x = standard_normal_vector(n, 2);
        let mut y = vec![0.0; n];
        let id = format!("n={n},nnz={}", a.nnz());
        group.bench_with_input(BenchmarkId::new("sequential", &id), &x, |b, x| {
            b.iter(|| a.spmv_sequential(black_box(x), &mut y))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", &id), &x, |b, x| b.iter(|| a.spmv_parallel(black_box(x), &mut y)));

        let half = IndexSet::new((0..n).step_by(2).collect()).unwrap();
        let sub = a.restrict(&half).unwrap();
        let xs = standard_normal_vector(half.len(), 3);
        let mut ys = vec![0.0; half.len()];
        group.bench_with_input(BenchmarkId::new("submatrix_sequential", &id), &xs, |b, x| {
            b.iter(|| sub.spmv_sequential(black_box(x), &mut ys))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("submatrix_parallel", &id), &xs, |b, x| {
            b.iter(|| sub.spmv_parallel(black_box(x), &mut ys))
        });
    }
    group.finish();
}

criterion_group!(benches, spmv);
criterion_main!(benches);
