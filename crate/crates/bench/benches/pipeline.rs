//! Benchmarks for the three kernels that dominate a run: correlation
//! assembly, sparse matrix-vector products, and rasterization.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use cogen_core::correlation::CorrelationMatrix;
use cogen_core::geometry::{rasterize, Grid, ShapeSpec};
use cogen_core::motion::{sample_relative_motion, MotionFn, Pose, Trajectory};
use nalgebra::Vector3;

fn gear_trajectory(k: usize) -> Trajectory {
    let m1: MotionFn = Arc::new(|t| {
        Pose::rotation_about(
            Pose::rotation_z(2.0 * std::f64::consts::PI * t).rotation,
            Vector3::zeros(),
        )
    });
    let m2: MotionFn = Arc::new(|t| {
        Pose::rotation_about(
            Pose::rotation_z(-2.0 * std::f64::consts::PI * t).rotation,
            Vector3::new(0.75, 0.0, 0.0),
        )
    });
    sample_relative_motion(m1.as_ref(), m2.as_ref(), k).unwrap()
}

fn bench_assemble(c: &mut Criterion) {
    let grid1 = Grid::new_2d([-0.5, -0.5], 1.0 / 64.0, [64, 64]).unwrap();
    let grid2 = Grid::new_2d([0.25, -0.5], 1.0 / 64.0, [64, 64]).unwrap();
    let mut group = c.benchmark_group("assemble");
    for k in [64usize, 128, 256] {
        let traj = gear_trajectory(k);
        group.throughput(Throughput::Elements((grid2.len() * k) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(k), &traj, |b, traj| {
            b.iter(|| CorrelationMatrix::assemble(&grid1, &grid2, traj.poses_12()).unwrap())
        });
    }
    group.finish();
}

fn bench_matvec(c: &mut Criterion) {
    let grid1 = Grid::new_2d([-0.5, -0.5], 1.0 / 128.0, [128, 128]).unwrap();
    let grid2 = Grid::new_2d([0.25, -0.5], 1.0 / 128.0, [128, 128]).unwrap();
    let traj = gear_trajectory(128);
    let w = CorrelationMatrix::assemble(&grid1, &grid2, traj.poses_12()).unwrap();
    let v: Vec<f64> = (0..w.cols()).map(|i| (i % 7) as f64 / 7.0).collect();
    let u: Vec<f64> = (0..w.rows()).map(|i| (i % 5) as f64 / 5.0).collect();

    let mut group = c.benchmark_group("matvec");
    group.throughput(Throughput::Elements(w.nnz() as u64));
    group.bench_function("forward", |b| b.iter(|| w.matvec(&v).unwrap()));
    group.bench_function("transposed", |b| b.iter(|| w.matvec_transposed(&u).unwrap()));
    group.finish();
}

fn bench_rasterize(c: &mut Criterion) {
    let grid = Grid::new_2d([-1.0, -1.0], 2.0 / 128.0, [128, 128]).unwrap();
    let shape = ShapeSpec::Difference(
        Box::new(ShapeSpec::ball_2d([0.0, 0.0], 0.8)),
        Box::new(ShapeSpec::ball_2d([0.2, 0.1], 0.4)),
    );
    let mut group = c.benchmark_group("rasterize");
    for s in [4u32, 8] {
        group.throughput(Throughput::Elements((grid.len() * (s * s) as usize) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            b.iter(|| rasterize(&shape, &grid, s))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_assemble, bench_matvec, bench_rasterize);
criterion_main!(benches);
