//! Sequential against data-parallel execution for the heavy paths.
//!
//! Run with `cargo bench -p rcip-core`; the parallel variants are only
//! compiled with the default `parallel` feature.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rcip_core::calibration::{calibrate_with, CalibrationConfig};
use rcip_core::evaluation::fwer_monte_carlo;
use rcip_core::sim::{generate_range, PredictorPreset, SyntheticGenerator, WorldConfig};
use rcip_core::Execution;

fn modes() -> Vec<(&'static str, Execution)> {
    vec![
        ("sequential", Execution::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Execution::Parallel),
    ]
}

fn bench_generation(c: &mut Criterion) {
    let world = WorldConfig::new(PredictorPreset::Medium, 7);
    let mut group = c.benchmark_group("hallway_generate_400");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_range(black_box(&world), 0, 400, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_calibrate(c: &mut Criterion) {
    let world = WorldConfig::new(PredictorPreset::Medium, 7);
    let records = generate_range(&world, 0, 400, Execution::default()).unwrap();
    let config = CalibrationConfig::miscoverage(0.15);
    let mut group = c.benchmark_group("calibrate_2000x5_m400");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| calibrate_with(black_box(&records), &config, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_fwer(c: &mut Criterion) {
    let config = CalibrationConfig::miscoverage(0.15);
    let generator = SyntheticGenerator::bernoulli();
    let mut group = c.benchmark_group("fwer_20_trials_m400");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fwer_monte_carlo(&generator, &config, 400, 20, 1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_generation, bench_calibrate, bench_fwer);
criterion_main!(benches);
