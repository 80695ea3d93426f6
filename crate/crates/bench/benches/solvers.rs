use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gabp_bench::{classification_set, dominant_problem};
use gabp_core::dist::{solve_distributed, train_distributed, ExecutionMode};
use gabp_core::gabp::solve;
use gabp_core::numerics::direct_solve;
use gabp_core::svm::{train, LoadingMode, TrainConfig};
use gabp_core::{KernelSpec, Schedule, Variant};

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("gabp");
    group.sample_size(10);
    for n in [50usize, 200] {
        let base = dominant_problem(n, 1);
        for (name, schedule, variant) in [
            ("sync_edge", Schedule::Synchronous, Variant::Edge),
            ("sync_broadcast", Schedule::Synchronous, Variant::Broadcast),
            ("async_edge", Schedule::AsynchronousSweep, Variant::Edge),
            ("async_broadcast", Schedule::AsynchronousSweep, Variant::Broadcast),
        ] {
            let p = base.clone().with_schedule(schedule).with_variant(variant);
            group.bench_with_input(BenchmarkId::new(name, n), &p, |b, p| b.iter(|| solve(p).unwrap()));
        }
        group.bench_with_input(BenchmarkId::new("cholesky", n), &base, |b, p| {
            b.iter(|| direct_solve(&p.matrix, &p.rhs).unwrap())
        });
    }
    group.finish();
}

fn distributed(c: &mut Criterion) {
    let mut group = c.benchmark_group("distributed");
    group.sample_size(10);
    let p = dominant_problem(400, 2).with_variant(Variant::Broadcast);
    for workers in [1usize, 2, 4] {
        for (mode, label) in [(ExecutionMode::Threaded, "threaded"), (ExecutionMode::Serial, "serial")] {
            group.bench_with_input(BenchmarkId::new(label, workers), &workers, |b, &w| {
                b.iter(|| solve_distributed(&p, w, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    let pts = classification_set(300, 3);
    let mut config = TrainConfig::new(KernelSpec::rbf(0.5, 1.0 / 300.0).unwrap());
    config.loading = LoadingMode::EnforceDominance;
    config.cost_c = 0.01;
    group.bench_function("single_process", |b| b.iter(|| train(&pts, &config).unwrap()));
    for workers in [2usize, 4] {
        group.bench_with_input(BenchmarkId::new("row_partitioned", workers), &workers, |b, &w| {
            b.iter(|| train_distributed(&pts, &config, w, ExecutionMode::Threaded).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, engines, distributed, training);
criterion_main!(benches);
