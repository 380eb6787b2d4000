//! Criterion benchmarks for the solver hot paths: free-space convolution,
//! one full Strang step, and the log-interaction integral.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::f64::consts::PI;

use pks_core::diagnostics::InteractionKernel;
use pks_core::dynamics::{Stepper, StepperOptions, StepperState, StrainField};
use pks_core::grid::{DensityField, Grid2D};
use pks_core::kernel::{build_kernel, convolve, BridgeKind, GradMode};

fn two_bump(grid: Grid2D) -> DensityField {
    let mut f = DensityField::gaussian(grid, 6.0 * PI, (0.0, 2.0), 0.5);
    let lower = DensityField::gaussian(grid, 6.0 * PI, (0.0, -2.0), 0.5);
    for (a, b) in f.values_mut().iter_mut().zip(lower.values()) {
        *a += *b;
    }
    f
}

fn bench_convolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve");
    group.sample_size(10);
    for n in [128usize, 256] {
        let grid = Grid2D::new(n, 8.0).unwrap();
        let table = build_kernel(2.0 * grid.spacing(), grid, BridgeKind::LogCap).unwrap();
        let field = two_bump(grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| convolve(&field, &table, GradMode::Convolution));
        });
    }
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    group.sample_size(10);
    for n in [128usize, 256] {
        let grid = Grid2D::new(n, 8.0).unwrap();
        let table = build_kernel(2.0 * grid.spacing(), grid, BridgeKind::LogCap).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let opts = StepperOptions {
                dt_cap: 1e-3,
                track_symmetry: false,
                ..Default::default()
            };
            let mut stepper = Stepper::new(&table, StrainField::new(1.0), opts);
            let mut state = StepperState::new(two_bump(grid));
            stepper.prime(&state);
            b.iter(|| stepper.step(&mut state, f64::INFINITY).unwrap());
        });
    }
    group.finish();
}

fn bench_log_interaction(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_interaction");
    group.sample_size(10);
    let grid = Grid2D::new(256, 8.0).unwrap();
    let kernel = InteractionKernel::new(grid);
    let field = two_bump(grid);
    group.bench_function("256", |b| {
        b.iter(|| kernel.interaction_energy(&field));
    });
    group.finish();
}

criterion_group!(benches, bench_convolve, bench_step, bench_log_interaction);
criterion_main!(benches);
