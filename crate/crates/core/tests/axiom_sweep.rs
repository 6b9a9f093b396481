use std::time::Instant;

use voa_core::axioms::{check_tuples, sample_tuples, AxiomKind};
use voa_core::rational::q_frac;
use voa_core::{build_model, ModelSpec};

fn sweep(spec: ModelSpec, count: usize) {
    let model = build_model(&spec).unwrap();
    for kind in AxiomKind::ALL {
        let start = Instant::now();
        let tuples = sample_tuples(&model, kind, count, 1);
        let s = check_tuples(&model, kind.name(), &tuples).unwrap();
        eprintln!("{} {} {:?} {:?}", s.model, s.identity, start.elapsed(), s.first_failure);
        assert!(s.pass(), "{:?}", s);
    }
}

#[test]
fn heisenberg_axioms_hold() {
    sweep(ModelSpec::heisenberg(1, 8), 500);
}

#[test]
fn virasoro_axioms_hold() {
    sweep(ModelSpec::virasoro(q_frac(1, 2), 8), 500);
    sweep(ModelSpec::virasoro(q_frac(1, 1), 8), 500);
}

#[test]
fn lattice_axioms_hold() {
    sweep(ModelSpec::lattice(2, 6), 500);
}

#[test]
fn every_heisenberg_mutation_is_detected() {
    use voa_core::axioms::generator_sweep;
    use voa_core::rational::q_int;
    use voa_core::{build_model_with, Mutation};
    let spec = ModelSpec::heisenberg(1, 4);
    let clean = build_model(&spec).unwrap();
    let basis = clean.basis();
    let n = basis.truncation() as i64;
    let mut count = 0;
    for mode in -n - 1..=n + 1 {
        for source in 0..basis.len() {
            let t = basis.degree(source) as i64 - mode;
            if t < 0 || t > n {
                continue;
            }
            for target in basis.range(t as usize) {
                let mu = Mutation { generator: 0, mode, source, target, delta: q_int(1) };
                let model = build_model_with(&spec, std::slice::from_ref(&mu)).unwrap();
                let s = check_tuples(&model, "commutator", &generator_sweep(&model)).unwrap();
                assert!(!s.pass(), "{mu:?} undetected");
                count += 1;
            }
        }
    }
    eprintln!("{count} mutations");
}
