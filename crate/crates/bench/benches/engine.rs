use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use voa_bench::{heisenberg, lattice, virasoro};
use voa_core::config::parse_state;
use voa_core::mode_engine::mode_of_state;
use voa_core::norms::NormLab;
use voa_core::rational::q_frac;
use voa_core::unitary::star;

fn build(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    for n in [6, 8, 10] {
        g.bench_with_input(BenchmarkId::new("heisenberg", n), &n, |b, &n| b.iter(|| heisenberg(n)));
        g.bench_with_input(BenchmarkId::new("virasoro_half", n), &n, |b, &n| b.iter(|| virasoro(q_frac(1, 2), n)));
        g.bench_with_input(BenchmarkId::new("lattice2", n), &n, |b, &n| b.iter(|| lattice(2, n)));
    }
    g.finish();
}

fn modes(c: &mut Criterion) {
    let model = lattice(2, 8);
    let a = parse_state(&model, "e+ + e-").unwrap();
    let nu = model.conformal_state().clone();
    let mut g = c.benchmark_group("mode_of_state");
    g.bench_function("lattice2_v1_k0", |b| b.iter(|| mode_of_state(&model, black_box(&a), 0).unwrap()));
    g.bench_function("lattice2_conformal_k1", |b| b.iter(|| mode_of_state(&model, black_box(&nu), 1).unwrap()));
    g.finish();
}

fn norms(c: &mut Criterion) {
    let model = virasoro(q_frac(1, 2), 12);
    let lab = NormLab::new(&model).unwrap();
    let nu = model.conformal_state().clone();
    let mut g = c.benchmark_group("norm_table");
    g.sample_size(10);
    g.bench_function("virasoro_half_m4_n8", |b| b.iter(|| lab.norm_table(black_box(&nu), -4..=4, 8).unwrap()));
    g.finish();
}

fn adjoint(c: &mut Criterion) {
    let model = heisenberg(8);
    let a = parse_state(&model, "#5 + 2*#7").unwrap();
    c.bench_function("star/heisenberg_n8", |b| b.iter(|| star(&model, black_box(&a)).unwrap()));
}

criterion_group!(benches, build, modes, norms, adjoint);
criterion_main!(benches);
