//! Benchmarks backing the complexity contract: nearest-neighbor queries and
//! walk ray steps should scale logarithmically in the dataset size, volume
//! kernels polynomially in the dimension.
//!
//! Run with `cargo bench -p annr-bench`; compare the `nearest_query` timings
//! across dataset sizes to check the logarithmic growth.

use annr_bench::{random_dataset, random_points};
use annr_core::engine::{Engine, EngineConfig, Lambda};
use annr_core::geometry::{circumcenter, simplex_volume, BoundingBox};
use annr_core::walk::descend_to_vertex;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn bench_nearest_query(c: &mut Criterion) {
    let mut group = c.benchmark_group("nearest_query");
    for n in [1_000usize, 10_000, 100_000, 1_000_000] {
        let data = random_dataset(n, 3, 7);
        let queries = random_points(1024, 3, 8);
        let mut i = 0;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                i = (i + 1) % queries.len();
                black_box(data.nearest(&queries[i], &[]).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_insert(c: &mut Criterion) {
    c.bench_function("insert_amortized_100k", |b| {
        b.iter_batched(
            || {
                (
                    random_dataset(100_000, 3, 5),
                    random_points(4096, 3, 6),
                    0usize,
                )
            },
            |(mut data, extra, mut i)| {
                for _ in 0..64 {
                    i = (i + 1) % extra.len();
                    let mut p = extra[i].clone();
                    p[0] += i as f64 * 1e-9; // avoid duplicate rejections
                    let _ = black_box(data.insert(p, 0.0));
                }
            },
            criterion::BatchSize::LargeInput,
        )
    });
}

fn bench_volume_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("simplex_volume");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dim in [2usize, 3, 6, 10] {
        let simplices: Vec<Vec<Vec<f64>>> = (0..256)
            .map(|_| {
                (0..=dim)
                    .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
                    .collect()
            })
            .collect();
        let mut i = 0;
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| {
                i = (i + 1) % simplices.len();
                black_box(simplex_volume(&simplices[i]).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_circumcenter(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let simplices: Vec<Vec<Vec<f64>>> = (0..256)
        .map(|_| {
            (0..=6)
                .map(|_| (0..6).map(|_| rng.gen::<f64>()).collect())
                .collect()
        })
        .collect();
    let mut i = 0;
    c.bench_function("circumcenter_6d", |b| {
        b.iter(|| {
            i = (i + 1) % simplices.len();
            black_box(circumcenter(&simplices[i]).ok())
        })
    });
}

fn bench_descend(c: &mut Criterion) {
    let mut group = c.benchmark_group("descend_to_vertex_2d");
    for n in [1_000usize, 10_000, 100_000] {
        let data = random_dataset(n, 2, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let start = rng.gen_range(0..n);
                black_box(descend_to_vertex(&data, start, &mut rng, 0).ok())
            })
        });
    }
    group.finish();
}

fn bench_engine_step(c: &mut Criterion) {
    c.bench_function("engine_step_2d_1k_points", |b| {
        let cfg = EngineConfig {
            dim: 2,
            bbox: BoundingBox::cube(2, -1.0, 1.0).unwrap(),
            lambda: Lambda::Auto,
            epsilon: 1e-300,
            budget: usize::MAX >> 1,
            walk_steps: 100,
            alpha0_deg: Some(89.0),
            n_init: 1000,
            include_corners: true,
            seed: 0,
        };
        let f = |x: &[f64]| -> Result<f64, String> {
            let n2: f64 = x.iter().map(|v| v * v).sum();
            Ok((-n2 * 5.0).exp())
        };
        let mut engine = Engine::new(cfg, f).unwrap();
        b.iter(|| black_box(engine.step().unwrap()))
    });
}

criterion_group!(
    benches,
    bench_nearest_query,
    bench_insert,
    bench_volume_kernels,
    bench_circumcenter,
    bench_descend,
    bench_engine_step
);
criterion_main!(benches);
