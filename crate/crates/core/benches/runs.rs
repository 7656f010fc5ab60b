use std::hint::black_box;

use commlab::par;
use commlab::training::{run_training, TrainingConfig};
use commlab::Condition;
use criterion::{criterion_group, criterion_main, Criterion};

fn jobs() -> Vec<(Condition, u64)> {
    Condition::ALL
        .iter()
        .flat_map(|&c| (0..4u64).map(move |s| (c, s)))
        .collect()
}

fn config() -> TrainingConfig {
    TrainingConfig {
        episodes: 20,
        ..Default::default()
    }
}

fn run_grid(c: &mut Criterion) {
    let jobs = jobs();
    let cfg = config();
    let mut group = c.benchmark_group("run_grid");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::map_sequential(&jobs, |&(cond, seed)| {
                run_training(black_box(&cfg), cond, seed).unwrap()
            })
        })
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| {
            par::map_parallel(&jobs, |&(cond, seed)| {
                run_training(black_box(&cfg), cond, seed).unwrap()
            })
        })
    });
    group.finish();
}

fn single_episode(c: &mut Criterion) {
    let cfg = TrainingConfig {
        episodes: 1,
        ..Default::default()
    };
    c.bench_function("ec_run_1_episode", |b| {
        b.iter(|| run_training(black_box(&cfg), Condition::Ec, 0).unwrap())
    });
}

criterion_group!(benches, run_grid, single_episode);
criterion_main!(benches);
