use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nls_core::ansatz::gaussian;
use nls_core::dynamics::SplitStepper;
use nls_core::exec;
use nls_core::functionals::Problem;
use nls_core::grid::make_grid;
use nls_core::model::{Kernel, ModelSpec, Nonlinearity, Potential};
use num_rational::Rational64;

fn problem() -> Problem {
    let f = Nonlinearity::Power { b: 1.0, p: Rational64::new(2, 5) };
    let model = ModelSpec::new(2, Potential::Harmonic { a: 1.0 }, f, Kernel::Gaussian { a: 1.0 }).unwrap();
    Problem::new(model, make_grid(2, 16.0, 256).unwrap()).unwrap()
}

fn modes() -> [(&'static str, bool); 2] {
    [("sequential", false), ("parallel", true)]
}

fn strang_step(c: &mut Criterion) {
    let pr = problem();
    let u0 = gaussian(pr.grid(), 2.0, 1.0, 0.0);
    let mut group = c.benchmark_group("strang_step_2d_256");
    for (name, par) in modes() {
        exec::set_parallel(par);
        let mut stepper = SplitStepper::new(&pr);
        let mut v = u0.values().to_vec();
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| stepper.step_values(&mut v, 1e-3)));
    }
    group.finish();
    exec::set_parallel(true);
}

fn diagnostics(c: &mut Criterion) {
    let pr = problem();
    let u0 = gaussian(pr.grid(), 2.0, 1.0, 0.5);
    let mut group = c.benchmark_group("diagnostics_2d_256");
    for (name, par) in modes() {
        exec::set_parallel(par);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| pr.diagnostics(&u0, 1.0, 0.0).unwrap()));
    }
    group.finish();
    exec::set_parallel(true);
}

fn fft(c: &mut Criterion) {
    let grid = make_grid(2, 16.0, 256).unwrap();
    let u0 = gaussian(&grid, 1.0, 1.0, 0.5);
    let mut group = c.benchmark_group("fft_round_trip_2d_256");
    for (name, par) in modes() {
        exec::set_parallel(par);
        let mut buf = u0.values().to_vec();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                grid.fft_forward(&mut buf);
                grid.fft_inverse(&mut buf);
            })
        });
    }
    group.finish();
    exec::set_parallel(true);
}

criterion_group!(benches, strang_step, diagnostics, fft);
criterion_main!(benches);
