//! Compares the data-parallel trial batch against the sequential path, plus
//! a single-trial engine throughput probe.
//!
//! Run with `cargo bench -p gsemo`; `cargo bench -p gsemo --no-default-features`
//! measures the build without the parallel feature (both batch functions then
//! take the sequential path).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gsemo::harness::{run_batch, run_batch_serial, run_trial, RunMode, TrialSpec};

fn specs(n: usize, trials: u64) -> Vec<TrialSpec> {
    (0..trials)
        .map(|seed| TrialSpec {
            n,
            seed,
            mode: RunMode::LastStage,
            max_iters: 10_000_000,
        })
        .collect()
}

fn bench_last_stage_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("last_stage_batch");
    group.sample_size(10);
    for n in [15usize, 31] {
        let batch = specs(n, 16);
        group.bench_with_input(BenchmarkId::new("parallel", n), &batch, |b, batch| {
            b.iter(|| run_batch(batch))
        });
        group.bench_with_input(BenchmarkId::new("serial", n), &batch, |b, batch| {
            b.iter(|| run_batch_serial(batch))
        });
    }
    group.finish();
}

fn bench_engine_iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    // A capped run gives a fixed 20k-iteration workload regardless of the
    // hitting time.
    let spec = TrialSpec {
        n: 127,
        seed: 3,
        mode: RunMode::LastStage,
        max_iters: 20_000,
    };
    group.bench_function("last_stage_20k_iters_n127", |b| {
        b.iter(|| run_trial(&spec))
    });
    group.finish();
}

criterion_group!(benches, bench_last_stage_batch, bench_engine_iterations);
criterion_main!(benches);
