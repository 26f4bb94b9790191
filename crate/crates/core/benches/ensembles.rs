use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use slowfast::chaos::ChaosExpansion;
use slowfast::functional_limits::{simulate_functionals, EnsembleConfig};
use slowfast::gaussian_noise::{FouSampler, FouSpec};
use slowfast::grid::TimeGrid;
use slowfast::par;

fn fou_ensemble(c: &mut Criterion) {
    let sampler = FouSampler::new(FouSpec::new(0.3, 0.01).unwrap(), TimeGrid::over(1.0, 2048).unwrap()).unwrap();
    let mut group = c.benchmark_group("fou_ensemble");
    group.sample_size(10);
    for (name, seq) in [("parallel", false), ("sequential", true)] {
        group.bench_function(BenchmarkId::new(name, 256), |b| {
            par::force_sequential(seq);
            b.iter(|| sampler.ensemble(3, 256));
            par::force_sequential(false);
        });
    }
    group.finish();
}

fn functional_ensemble(c: &mut Criterion) {
    let cfg = EnsembleConfig { hurst: 0.3, eps: vec![0.1, 0.03, 0.01], horizon: 1.0, out_steps: 20, paths: 128, seed: 1, resolution: 30 };
    let family = [ChaosExpansion::hermite(2), ChaosExpansion::hermite(3)];
    let mut group = c.benchmark_group("functional_ensemble");
    group.sample_size(10);
    for (name, seq) in [("parallel", false), ("sequential", true)] {
        group.bench_function(BenchmarkId::new(name, cfg.paths), |b| {
            par::force_sequential(seq);
            b.iter(|| simulate_functionals(&family, &cfg).unwrap());
            par::force_sequential(false);
        });
    }
    group.finish();
}

criterion_group!(benches, fou_ensemble, functional_ensemble);
criterion_main!(benches);
