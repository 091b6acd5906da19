use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use fracblow_bench::{coarse_grid, order};
use fracblow_core::{solve, BallDomain, BoundaryMeasure, Nonlinearity, SolveOptions};

fn solve_power(c: &mut Criterion) {
    let dom = BallDomain::disk();
    let o = order();
    let grid = coarse_grid();
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("solve_power_2_5");
    group.sample_size(10);
    for k in [1.0, 16.0, 256.0] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| {
                let g = Nonlinearity::power(2.5).unwrap();
                solve(&dom, o, g, &BoundaryMeasure::Hausdorff, black_box(k), &grid, &opts).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, solve_power);
criterion_main!(benches);
