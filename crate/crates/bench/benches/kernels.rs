use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nswz_bench::fixture;
use nswz_core::dynamics::{Driver, Mode, NoiseModel, Solver, SolverConfig};
use nswz_core::rough::{dyadic_pairs, RoughPathLift};
use nswz_core::spectral::{biot_savart, SpectralOps};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for m in [4, 8] {
        let f = fixture(m);
        let u = biot_savart(&f.xi);
        let v = NoiseModel::from_config(&f.cfg)
            .unwrap()
            .velocity_on_segment(&f.paths, 0)
            .unwrap();
        let mut ops = SpectralOps::new(m);
        group.bench_with_input(BenchmarkId::new("lie_derivative", m), &m, |b, _| {
            b.iter(|| ops.lie_derivative(&u, &f.xi).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("transport", m), &m, |b, _| {
            b.iter(|| ops.transport(&v, f.xi.coeffs()).unwrap())
        });
        ops.set_transport_field(&v).unwrap();
        group.bench_with_input(BenchmarkId::new("lie_and_cached_transport", m), &m, |b, _| {
            b.iter(|| ops.lie_and_cached_transport(&u, &f.xi).unwrap())
        });
    }
    group.finish();
}

fn integrator(c: &mut Criterion) {
    let f = fixture(8);
    let mut solver = Solver::new(&f.cfg).unwrap();
    let v = solver.noise_model().velocity_on_segment(&f.paths, 0).unwrap();
    solver.set_transport(Some(&v)).unwrap();
    c.bench_function("heun_step_m8", |b| b.iter(|| solver.step(&f.xi, 0.0, f.cfg.dt).unwrap()));

    let short = SolverConfig {
        m: 4,
        shell: 1,
        horizon: 0.25,
        saves: 4,
        ..Default::default()
    };
    let g = fixture(4);
    let mut group = c.benchmark_group("trajectory");
    group.sample_size(10);
    group.bench_function("wong_zakai_m4", |b| {
        b.iter(|| {
            Solver::new(&short)
                .unwrap()
                .simulate(Mode::WongZakai, Driver::PiecewiseLinear(&g.paths), &g.xi)
                .unwrap()
        })
    });
    group.finish();
}

fn rough(c: &mut Criterion) {
    let f = fixture(8);
    let grid: Vec<f64> = (0..=256).map(|i| f.cfg.horizon * i as f64 / 256.0).collect();
    let lift = RoughPathLift::stratonovich_reference(&f.ensemble, &grid, 0.4).unwrap();
    let pairs = dyadic_pairs(256).unwrap();
    c.bench_function("level2_dyadic_pairs", |b| b.iter(|| lift.level2_map(&pairs)));
}

criterion_group!(benches, spectral, integrator, rough);
criterion_main!(benches);
