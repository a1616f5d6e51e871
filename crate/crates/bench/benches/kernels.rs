use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vortonlab::spectral::{GridPreset, Solver};
use vortonlab::vortons::vorton_rhs;
use vortonlab::*;

fn kernel_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_eval");
    let specs = [
        ("unit_peak_p3", KernelSpec::unit_peak_p3(1.0)),
        ("smoothed_2d_p3", KernelSpec::smoothed(2, 1.0, 3, Normalization::Operator)),
        ("composite_3d", KernelSpec { eps: 1.0, ..KernelSpec::smoothed(3, 0.5, 2, Normalization::Operator) }),
    ];
    for (name, spec) in specs {
        let kernel = radial_pair(&spec).unwrap();
        group.bench_function(name, |b| b.iter(|| kernel.matrix(black_box(&Vec3::new(0.3, -0.7, 0.2))).unwrap()));
    }
    group.finish();
}

fn vorton_system(n: usize) -> VortonSystem {
    let positions = (0..n).map(|i| {
        let t = i as f64 * 2.399963;
        Vec3::new(t.cos(), t.sin(), 0.01 * i as f64) * (1.0 + 0.1 * i as f64).sqrt()
    });
    let momenta = (0..n).map(|i| Vec3::new((i as f64).sin(), (i as f64).cos(), 0.1));
    VortonSystem::new(&KernelSpec::unit_peak_p3(1.0), positions.collect(), momenta.collect()).unwrap()
}

fn vorton_rhs_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("vorton_rhs");
    for n in [2, 16, 128] {
        let state = vorton_system(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| b.iter(|| vorton_rhs(black_box(s))));
    }
    group.finish();
}

fn spectral_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_step");
    group.sample_size(10);
    let spec = KernelSpec::smoothed(2, 0.1, 3, Normalization::Operator);
    for res in [64, 128] {
        let solver = Solver::new(&spec, res, 2.0 * PI).unwrap();
        let v = GridPreset::vortex_pair().sample(res, 2.0 * PI).unwrap();
        let state = solver.momentum_from_velocity(&v).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(res), &state, |b, s| {
            b.iter(|| {
                let mut s = s.clone();
                solver.step(&mut s, 0.005).unwrap();
                s
            })
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_eval, vorton_rhs_bench, spectral_step);
criterion_main!(benches);
