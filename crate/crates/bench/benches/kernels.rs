use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gelfand_bench::DiskCase;
use gelfand_core::diagnostics::{linearized_spectrum, project_kernel, FnSampler};
use gelfand_core::hamiltonian::f_m_derivatives;
use gelfand_core::liouville::kernel_value;
use gelfand_core::solver::{bubble_ansatz, default_r0, newton_solve, NewtonOptions};
use gelfand_core::{vec2, Domain, GreenBackend, GreenEvaluator, Shape, WeightSpec};

fn green(c: &mut Criterion) {
    let x = vec2(0.3, -0.2);
    let y = vec2(-0.1, 0.45);
    let disk = GreenEvaluator::auto(Domain::unit_disk()).unwrap();
    c.bench_function("green/disk closed form", |b| b.iter(|| disk.green_value(black_box(x), black_box(y)).unwrap()));
    let bie = GreenEvaluator::new(Domain::unit_disk(), GreenBackend::Boundary).unwrap();
    c.bench_function("green/disk boundary integral", |b| b.iter(|| bie.green_value(black_box(x), black_box(y)).unwrap()));
    let rect = GreenEvaluator::auto(Domain::rectangle(-1.0, -1.0, 1.0, 1.0).unwrap()).unwrap();
    c.bench_function("green/square image series", |b| b.iter(|| rect.green_value(black_box(x), black_box(y)).unwrap()));
    let ellipse = GreenEvaluator::auto(Domain::new(Shape::Ellipse { center: [0.0, 0.0], a: 1.0, b: 0.6 }).unwrap()).unwrap();
    c.bench_function("green/ellipse boundary integral", |b| b.iter(|| ellipse.green_value(black_box(x), black_box(vec2(-0.1, 0.3))).unwrap()));
}

fn hamiltonian(c: &mut Criterion) {
    let g = GreenEvaluator::auto(Domain::rectangle(0.0, 0.0, 2.0, 1.0).unwrap()).unwrap();
    let w = WeightSpec::unit();
    let pts = [vec2(0.55, 0.5), vec2(1.45, 0.5)];
    c.bench_function("hamiltonian/f_2 derivatives", |b| b.iter(|| f_m_derivatives(&g, &w, black_box(&pts)).unwrap()));
}

fn solver(c: &mut Criterion) {
    let case = DiskCase::new();
    let delta = 1e-2;
    let p = case.problem(129, delta);
    let r0 = default_r0(&case.cfg, &case.domain);
    let ans = bubble_ansatz(&p, &case.green, &case.cfg, &[(8.0 / delta).ln()], r0).unwrap();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("newton from ansatz, 129 grid", |b| b.iter(|| newton_solve(&p, &ans.w, ans.eps(), &NewtonOptions::default()).unwrap()));
    let pt = case.solution(&p, delta);
    group.bench_function("linearized spectrum, 129 grid", |b| b.iter(|| linearized_spectrum(&p, &pt.w, pt.eps2, 3, 1e-6).unwrap()));
    group.finish();
}

fn projection(c: &mut Criterion) {
    let f = FnSampler { f: |z: gelfand_core::Vec2| kernel_value(1, 1.0, z / 0.05), step: 1e-7 };
    c.bench_function("diagnostics/kernel projection", |b| b.iter(|| project_kernel(&f, vec2(0.0, 0.0), 8.0, 1.0, 20.0).unwrap()));
}

criterion_group!(benches, green, hamiltonian, solver, projection);
criterion_main!(benches);
