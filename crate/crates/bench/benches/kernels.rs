use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lpdev::mc::estimate_tail;
use lpdev::rates::rate_critical_b2;
use lpdev::sampling::project_norm_repr;
use lpdev::specfun::log_gamma;
use lpdev::{Estimator, ProjectionConfig, RngStream, Statistic, TailQuery, Tilt, WLaw};

fn representation(c: &mut Criterion) {
    let mut g = c.benchmark_group("project_norm_repr");
    for (n, p) in [(1000, 2.0), (1000, 3.0), (10_000, 1.5)] {
        let cfg = ProjectionConfig::new(n, n / 10, p, WLaw::Exponential).unwrap();
        let mut rng = RngStream::new(1, 0);
        g.bench_with_input(BenchmarkId::new(format!("p={p}"), n), &cfg, |b, cfg| {
            b.iter(|| project_norm_repr(cfg, &mut rng))
        });
    }
    g.finish();
}

fn variates(c: &mut Criterion) {
    let mut rng = RngStream::new(2, 0);
    for shape in [0.3, 1.0 / 3.0 + 1.0, 50.0] {
        c.bench_function(&format!("gamma shape={shape:.3}"), |b| b.iter(|| rng.gamma(black_box(shape))));
    }
    c.bench_function("log_gamma", |b| b.iter(|| log_gamma(black_box(7.25))));
}

fn b2(c: &mut Criterion) {
    c.bench_function("rate_critical_b2 p=1.3 x=3", |b| {
        b.iter(|| rate_critical_b2(black_box(1.3), black_box(3.0), 1e-10))
    });
}

fn tilted_tail(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_tail");
    let budget = 1 << 16;
    g.throughput(Throughput::Elements(budget));
    g.sample_size(10);
    let cfg = ProjectionConfig::new(1000, 100, 2.0, WLaw::Exponential).unwrap();
    let mut q = TailQuery::new(cfg, Statistic::ZOverSqrtK, 1.3, 100.0, budget);
    q.estimator = Estimator::Tilted(Tilt { head: 0.2, tail: -0.02, power: 0.0 });
    g.bench_function("tilted p=2 n=1000", |b| b.iter(|| estimate_tail(&q, 3, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, representation, variates, b2, tilted_tail);
criterion_main!(benches);
