use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use hsforest::data::Matrix;
use hsforest::dist::{sample_inverse_gamma, sample_truncated_normal, RngStream};
use hsforest::estimands::c_index;
use hsforest::horseshoe::ShrinkageConfig;
use hsforest::moves::{MoveConfig, TreePrior};
use hsforest::sampler::ForestState;
use hsforest::tree::SplitCache;

fn bench_distributions(c: &mut Criterion) {
    let mut rng = RngStream::new(1, 0);
    c.bench_function("inverse_gamma", |b| {
        b.iter(|| sample_inverse_gamma(black_box(1.0), black_box(2.5), &mut rng).unwrap())
    });
    c.bench_function("truncated_normal_mild", |b| {
        b.iter(|| {
            sample_truncated_normal(0.0, 1.0, black_box(0.2), f64::INFINITY, &mut rng).unwrap()
        })
    });
    c.bench_function("truncated_normal_tail", |b| {
        b.iter(|| {
            sample_truncated_normal(0.0, 1.0, black_box(4.5), f64::INFINITY, &mut rng).unwrap()
        })
    });
}

fn bench_tree_update(c: &mut Criterion) {
    let n = 200;
    let p = 100;
    let mut rng = RngStream::new(2, 0);
    let x = Matrix::from_columns(
        n,
        (0..p).map(|_| (0..n).map(|_| rng.uniform()).collect()).collect(),
    )
    .unwrap();
    let resid: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let cfg = ShrinkageConfig::new(0.5, 0.1, 50).unwrap();
    let rows: Vec<u32> = (0..n as u32).collect();
    let cache = SplitCache::build(&x, &rows);
    let moves = MoveConfig::default();
    c.bench_function("rj_tree_update_n200_p100", |b| {
        b.iter_batched(
            || ForestState::new(1, n, cfg),
            |mut forest| {
                for _ in 0..10 {
                    forest
                        .update_tree(
                            0,
                            &x,
                            Some(&cache),
                            &resid,
                            None,
                            1.0,
                            TreePrior::default(),
                            &moves,
                            &mut rng,
                        )
                        .unwrap();
                }
                forest
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_c_index(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 0);
    let n = 500;
    let y: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0).collect();
    let delta: Vec<u8> = (0..n).map(|_| u8::from(rng.uniform() < 0.6)).collect();
    let scores: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    c.bench_function("c_index_n500", |b| {
        b.iter(|| c_index(black_box(&scores), &y, &delta).unwrap())
    });
}

criterion_group!(benches, bench_distributions, bench_tree_update, bench_c_index);
criterion_main!(benches);
