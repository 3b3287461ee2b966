use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hypertwin::experiment::{fit_fringes, fringe_points, simulate_counts, DarkCorrection, FitOptions, FitWeighting};
use hypertwin::measurement::{beta_scan, grid, Analyzer, ScanConfig};
use hypertwin::presets;
use hypertwin::tomography::{mle_reconstruct, MleOptions, TomographyDataset};
use hypertwin::AnalyzerConfig;

fn analyzer() -> Analyzer {
    Analyzer::new(AnalyzerConfig::default()).unwrap()
}

fn bench_beta_scan(c: &mut Criterion) {
    let a = analyzer();
    let rho = presets::source_state(0.98).unwrap();
    let alpha = grid(0.0, 1.8, 100);
    let phi = grid(0.0, TAU / 100.0, 100);
    c.bench_function("beta_scan 100x100", |b| {
        b.iter(|| beta_scan(&a, black_box(&rho), &alpha, &phi, &ScanConfig::default()).unwrap())
    });
}

fn bench_simulate_counts(c: &mut Criterion) {
    let a = analyzer();
    let rho = presets::source_state(0.98).unwrap();
    let plan = presets::table_plan(&presets::standard_quad(), 1);
    c.bench_function("simulate_counts 256 probes", |b| {
        b.iter(|| simulate_counts(&a, black_box(&rho), &plan).unwrap())
    });
}

fn bench_fit_fringes(c: &mut Criterion) {
    let a = analyzer();
    let rho = presets::source_state(0.98).unwrap();
    let records = simulate_counts(&a, &rho, &presets::fringe_surface_plan(0.0, 0.0, 1)).unwrap();
    let points = fringe_points(&records, DarkCorrection::Unclamped);
    let opts = FitOptions {
        weighting: FitWeighting::Poisson {
            background: presets::DARK_COUNTS_PER_MEASUREMENT,
        },
        ..FitOptions::default()
    };
    c.bench_function("fit_fringes 16x16", |b| {
        b.iter(|| fit_fringes(black_box(&points), &opts).unwrap())
    });
}

fn bench_mle(c: &mut Criterion) {
    let a = analyzer();
    let rho = presets::source_state(0.98).unwrap();
    let records = simulate_counts(&a, &rho, &presets::tomography_plan(1)).unwrap();
    let data = TomographyDataset::from_records(&a, &records, DarkCorrection::Clamped).unwrap();
    let mut group = c.benchmark_group("tomography");
    group.sample_size(10);
    group.bench_function("mle_reconstruct 81 settings", |b| {
        b.iter(|| mle_reconstruct(black_box(&data), &MleOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_beta_scan,
    bench_simulate_counts,
    bench_fit_fringes,
    bench_mle
);
criterion_main!(benches);
