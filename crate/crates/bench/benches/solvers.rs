use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use darcylab_core::cell::{permeability, PermeabilityTensor};
use darcylab_core::darcy::{solve_darcy, DarcyProblem};
use darcylab_core::geometry::{DomainSpec, HoleShape};
use darcylab_core::grid::{GridSpec, StaggeredVectorField};
use darcylab_core::micro::{run_micro, CarreauParams, ForcingKind, MicroConfig, ViscosityModel};

fn cell(c: &mut Criterion) {
    let mut group = c.benchmark_group("cell_problem");
    group.sample_size(10);
    for n in [16, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| permeability(&HoleShape::disk(0.25), n, 1e-9).unwrap().0)
        });
    }
    group.finish();
}

fn micro(c: &mut Criterion) {
    let domain = DomainSpec {
        lx: 0.5,
        ly: 0.5,
        epsilon: 0.125,
        hole: HoleShape::disk(0.25),
        cells_per_eps: 8,
    };
    let viscosity = ViscosityModel::Carreau(CarreauParams {
        eta0: 1.0,
        eta_inf: 0.5,
        lambda: 1.0,
        r: 1.5,
    });
    let mut cfg = MicroConfig::new(domain, viscosity, ForcingKind::Vortex { amplitude: 1.0 });
    cfg.t_end = 0.05;
    let mut group = c.benchmark_group("micro");
    group.sample_size(10);
    group.bench_function("carreau_r1.5_32x32", |b| b.iter(|| run_micro(&cfg).unwrap().summary));
    group.finish();
}

fn darcy(c: &mut Criterion) {
    let a = PermeabilityTensor {
        entries: [[0.03, 0.006], [0.006, 0.02]],
    };
    let mut group = c.benchmark_group("darcy");
    group.sample_size(10);
    for n in [32, 64] {
        let g = GridSpec::walled(n, n, 1.0, 1.0).unwrap();
        let f = StaggeredVectorField::from_fn(g, |x, y| (3.0 * y).sin() + x * x, |x, y| (2.0 * x).cos() * y);
        let problem = DarcyProblem::new(a, 1.0, f);
        group.bench_with_input(BenchmarkId::from_parameter(n), &problem, |b, p| b.iter(|| solve_darcy(p).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, cell, micro, darcy);
criterion_main!(benches);
