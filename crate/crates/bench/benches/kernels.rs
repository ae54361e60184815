use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use swl_core::solver::SpectralSolver;
use swl_core::{sample_increments, Grid, KernelFamily, NoiseSampler, SigmaSpec, SpatialKernel};

fn field_sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("field");
    for (dim, n, family) in [(1, 2048, KernelFamily::Triangle), (2, 128, KernelFamily::Gaussian)] {
        let kernel = SpatialKernel::new(family, 1.0, 1.0, dim).unwrap();
        let grid = Grid::new(dim, 0.025 * n as f64, n, 0.025, 2).unwrap();
        let sampler = NoiseSampler::new(&kernel, &grid).unwrap();
        let mut rng = swl_core::rng::stream(1, 0);
        g.bench_function(format!("d{dim}_n{n}"), |b| b.iter(|| black_box(sampler.sample_field(&mut rng))));
    }
    g.finish();
}

fn solver_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(20);
    for (dim, n, family) in [(1, 2048, KernelFamily::Triangle), (2, 128, KernelFamily::Gaussian)] {
        let kernel = SpatialKernel::new(family, 1.0, 1.0, dim).unwrap();
        let grid = Grid::new(dim, 0.025 * n as f64, n, 0.025, 8).unwrap();
        let noise = sample_increments(&kernel, &grid, 1).unwrap();
        let solver = SpectralSolver::new(&grid);
        let mut work = solver.work();
        let sigma = SigmaSpec::identity();
        g.bench_function(format!("d{dim}_n{n}_8steps"), |b| {
            b.iter(|| {
                let mut last = 0.0;
                solver
                    .run(&sigma, &noise, &mut work, |k| k == 8, |_, u| last = u[0])
                    .unwrap();
                black_box(last)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, field_sampling, solver_steps);
criterion_main!(benches);
