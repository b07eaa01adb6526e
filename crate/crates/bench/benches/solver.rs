use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use svie_bench::{fading, ou};
use svie_core::invariance::{energy_distance_1d, permutation_p_value};
use svie_core::space::shift;
use svie_core::{Curve, Grid, GridMetric, HilbertPoint, NoiseStream, WeightFunction};

fn paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("path");
    let s = ou(1.0 / 256.0).solver(5.0).unwrap();
    g.bench_function("ou_1280_steps", |b| b.iter(|| s.terminal(&NoiseStream::new(1, black_box(0))).unwrap()));
    for d in [1, 3] {
        let s = fading(1.0 / 16.0, d).solver(10.0).unwrap();
        g.bench_with_input(BenchmarkId::new("fading_160_steps", d), &s, |b, s| {
            b.iter(|| s.terminal(&NoiseStream::new(1, black_box(0))).unwrap())
        });
    }
    let s = fading(1.0 / 32.0, 2).solver(4.0).unwrap();
    g.bench_function("direct_sum_128_steps", |b| b.iter(|| s.svie_direct(&NoiseStream::new(1, black_box(0))).unwrap()));
    g.finish();
}

fn space(c: &mut Criterion) {
    let w = WeightFunction::exponential(1.0).unwrap();
    let grid = Grid::new(1.0 / 1024.0, 16 * 1024).unwrap();
    let metric = GridMetric::new(&w, grid);
    let h = Curve::from_fn(grid, 3, |x, out| out.iter_mut().enumerate().for_each(|(k, o)| *o = (x + k as f64).sin()));
    c.bench_function("norm_w_16k_nodes", |b| b.iter(|| metric.norm(black_box(&h)).unwrap()));
    c.bench_function("shift_16k_nodes", |b| b.iter(|| shift(black_box(&h), 100)));
}

fn tests(c: &mut Criterion) {
    let x: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.618).fract()).collect();
    let y: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.414).fract()).collect();
    c.bench_function("energy_distance_1d_10k", |b| b.iter(|| energy_distance_1d(black_box(&x), black_box(&y))));
    let px: Vec<HilbertPoint> = x[..2000].iter().map(|v| HilbertPoint(vec![*v])).collect();
    let py: Vec<HilbertPoint> = y[..2000].iter().map(|v| HilbertPoint(vec![*v])).collect();
    c.bench_function("permutation_test_2k", |b| b.iter(|| permutation_p_value(&px, &py, 500, 3)));
}

criterion_group!(benches, paths, space, tests);
criterion_main!(benches);
