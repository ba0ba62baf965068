//! Solve + estimate on the full-size benchmark, with and without rayon.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use qc_chain::experiment::FULL_SCALE_N;
use qc_chain::{build_benchmark, estimate, optimal_mesh, par, solve_qc, RefinementConfig, Scheme};

fn solve_and_estimate(c: &mut Criterion) {
    let b = build_benchmark(FULL_SCALE_N, 5.0, 1.0).unwrap();
    let mut rc = RefinementConfig::new(Scheme::Optimal, FULL_SCALE_N);
    rc.k_atoms = 64;
    let mesh = Arc::new(optimal_mesh(&b.cfg, &|r| b.force.radial(r), &rc).unwrap());
    let (y, _) = solve_qc(mesh.clone(), b.potential, Some(b.force_field()), None).unwrap();

    let mut group = c.benchmark_group("qc_8193_k64");
    group.sample_size(20);
    for (name, sequential) in [("parallel", false), ("sequential", true)] {
        par::set_force_sequential(sequential);
        group.bench_function(format!("estimate/{name}"), |bench| {
            bench.iter(|| estimate(&y, &b.potential, Some(b.force_field())).unwrap())
        });
        group.bench_function(format!("solve/{name}"), |bench| {
            bench.iter(|| solve_qc(mesh.clone(), b.potential, Some(b.force_field()), None).unwrap())
        });
    }
    par::set_force_sequential(false);
    group.finish();
}

criterion_group!(benches, solve_and_estimate);
criterion_main!(benches);
