use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jmlab_core::sector_optics::{build_counterexample_sector, oracle_shortest_path, poles};
use jmlab_core::variational::{minimize_fixed_time, MinimizeOptions};
use jmlab_core::{Convention, HomogeneousPotential, JmMetric, ParamKind, SampledPath, StepShapeParams};

fn oracle(c: &mut Criterion) {
    let metric = build_counterexample_sector(
        StepShapeParams::new(1.0, 2.0, 0.5).unwrap(),
        1.0,
        Convention::ShapeLinear,
    )
    .unwrap();
    let (n, s) = poles(&metric);
    let mut group = c.benchmark_group("oracle_shortest_path");
    group.sample_size(10);
    for res in [100, 200, 400] {
        group.bench_with_input(BenchmarkId::from_parameter(res), &res, |b, &res| {
            b.iter(|| oracle_shortest_path(&metric, n, s, black_box(res), 4).unwrap())
        });
    }
    group.finish();
}

fn jm_length(c: &mut Criterion) {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let metric = JmMetric::new(-0.2, &pot);
    let mut group = c.benchmark_group("jm_length");
    for n in [100, 1_000, 10_000] {
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                vec![(1.0 + 0.3 * t) * (2.0 * t).cos(), (1.0 + 0.3 * t) * (2.0 * t).sin()]
            })
            .collect();
        let path = SampledPath::uniform(pts, ParamKind::Abstract).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &path, |b, path| {
            b.iter(|| metric.jm_length(black_box(path)).unwrap())
        });
    }
    group.finish();
}

fn minimizer(c: &mut Criterion) {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let mut group = c.benchmark_group("minimize_fixed_time");
    group.sample_size(20);
    for n in [51, 201] {
        let opts = MinimizeOptions { n_samples: n, starts: 1, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(n), &opts, |b, opts| {
            b.iter(|| minimize_fixed_time(&[1.0, 0.0], &[0.5, 0.8], 1.0, &pot, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle, jm_length, minimizer);
criterion_main!(benches);
