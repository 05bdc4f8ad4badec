use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nonlocal_ch::dynamics::{lift_theta, run_difference};
use nonlocal_ch::harness::config::DomainConfig;
use nonlocal_ch::harness::{Resolved, RunConfig};
use nonlocal_ch::Execution;

fn setup(domain: DomainConfig) -> (Resolved, Vec<(f64, f64)>) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let mut config = RunConfig::load(&path).unwrap();
    config.params.t_final = 0.1;
    config.domain = domain;
    let schedule = config.sweep.as_ref().unwrap().pairs().unwrap();
    (config.resolve().unwrap(), schedule)
}

// One (alpha, epsilon) sweep of the relaxation-limit difference, run pair by
// pair or fanned out over the rayon pool.
fn sweep(c: &mut Criterion) {
    let grids = [
        ("1d_64", DomainConfig { dim: 1, lengths: vec![1.0], n: vec![64] }),
        ("2d_32x32", DomainConfig { dim: 2, lengths: vec![1.0, 1.0], n: vec![32, 32] }),
    ];
    let mut group = c.benchmark_group("difference_sweep");
    group.sample_size(10);
    for (grid, domain) in grids {
        let (r, schedule) = setup(domain);
        let phi0 = r.config.initial.phi.generate(&r.domain).unwrap();
        let theta0 = lift_theta(&phi0, &r.kernel, &r.potential, r.params.delta).unwrap();
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, grid), &exec, |b, &exec| {
                b.iter(|| {
                    run_difference(black_box(&phi0), &theta0, &r.kernel, &r.potential, &r.params, &schedule, exec)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
