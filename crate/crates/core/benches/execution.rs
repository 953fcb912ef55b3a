use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use chanmix::channelcore::{DecoherenceFunction, MixtureSpec};
use chanmix::dynamics::{mixture_eigenvalues_with, TimeGrid};
use chanmix::par::Execution;
use chanmix::semigroupforge::{simplex_scan_with, theorem2_scan_with, ScanFamily};

fn modes() -> Vec<(&'static str, Execution)> {
    #[allow(unused_mut)]
    let mut v = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Execution::Parallel));
    v
}

fn scans(c: &mut Criterion) {
    let mut g = c.benchmark_group("theorem_scan_d3_100");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| theorem2_scan_with(3, 100, 7, exec))
        });
    }
    g.finish();
}

fn simplex(c: &mut Criterion) {
    let mut g = c.benchmark_group("simplex_scan_d2_step0.1");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simplex_scan_with(2, 0.1, ScanFamily::Semigroup, 1.0, exec).unwrap())
        });
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let p = DecoherenceFunction::expression("0.6*(1-exp(-t))*(1-0.4*sin(2*t)^2)").unwrap();
    let spec = MixtureSpec::new(5, (1..=6).map(|b| (1.0 / 6.0, b, p.clone())));
    let grid = TimeGrid::uniform(5.0, 20_000).unwrap();
    let mut g = c.benchmark_group("mixture_eigenvalues_d5_20000");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mixture_eigenvalues_with(&spec, &grid, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, scans, simplex, spectrum);
criterion_main!(benches);
