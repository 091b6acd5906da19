use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fracblow_bench::{default_grid, order};
use fracblow_core::fraclap::{frac_lap_eval, DistancePower};
use fracblow_core::green::GreenKernel;
use fracblow_core::operator::GreenOperator;
use fracblow_core::{ctau, BallDomain, BallPoint};

fn kernel_eval(c: &mut Criterion) {
    let kernel = GreenKernel::new(2, order());
    let x = BallPoint::polar(0.3, 0.2);
    let y = BallPoint::polar(0.01, 2.5);
    c.bench_function("green_kernel_eval", |b| b.iter(|| kernel.eval(black_box(&x), black_box(&y))));
}

fn c_tau_eval(c: &mut Criterion) {
    let o = order();
    c.bench_function("c_tau", |b| b.iter(|| ctau::c_tau(o, black_box(-0.3)).unwrap()));
    c.bench_function("tau0", |b| b.iter(|| ctau::tau0(o, black_box(1e-8)).unwrap()));
}

fn operator(c: &mut Criterion) {
    let grid = default_grid();
    let o = order();
    let mut group = c.benchmark_group("green_operator");
    group.sample_size(10);
    group.bench_function("assemble", |b| b.iter(|| GreenOperator::assemble(o, black_box(&grid), -0.5).unwrap()));
    let op = GreenOperator::assemble(o, &grid, -0.5).unwrap();
    let f = vec![1.0; op.size()];
    group.bench_function("apply", |b| b.iter(|| op.apply(black_box(&f))));
    group.finish();
}

fn frac_lap(c: &mut Criterion) {
    let dom = BallDomain::disk();
    let o = order();
    let u = DistancePower { exponent: -0.5 };
    let x = BallPoint::polar(0.05, 0.7);
    let mut group = c.benchmark_group("frac_lap_eval");
    group.sample_size(20);
    group.bench_function("distance_power", |b| b.iter(|| frac_lap_eval(&dom, o, &u, black_box(&x), 1e-6).unwrap()));
    group.finish();
}

criterion_group!(benches, kernel_eval, c_tau_eval, operator, frac_lap);
criterion_main!(benches);
