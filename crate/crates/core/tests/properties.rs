use std::sync::OnceLock;

use proptest::prelude::*;
use voa_core::certify::{bootstrap_fit, fit_exponents, BootstrapVerdict};
use voa_core::mode_engine::apply_mode;
use voa_core::norms::{NormCell, NormLab, NormTable};
use voa_core::rational::{format_q, parse_q, q_frac, q_int};
use voa_core::unitary::star;
use voa_core::{build_model, Model, ModelSpec, StateVector};

fn models() -> &'static [Model] {
    static MODELS: OnceLock<Vec<Model>> = OnceLock::new();
    MODELS.get_or_init(|| {
        [ModelSpec::heisenberg(1, 8), ModelSpec::virasoro(q_frac(1, 2), 8), ModelSpec::lattice(2, 6)]
            .iter()
            .map(|s| build_model(s).unwrap())
            .collect()
    })
}

/// Up to three basis states of degree at most `max_degree`, small rational
/// coefficients.
fn state(model: &Model, max_degree: usize, picks: &[(usize, i64, i64)]) -> StateVector {
    let end = model.basis().range(max_degree).end;
    StateVector::from_terms(picks.iter().map(|&(i, p, q)| (i % end, q_frac(p, q))))
}

fn picks() -> impl Strategy<Value = Vec<(usize, i64, i64)>> {
    prop::collection::vec((0usize..1000, -4i64..=4, 1i64..=3), 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rationals_round_trip_through_text(p in -1_000_000i64..1_000_000, q in 1i64..1_000_000) {
        let x = q_frac(p, q);
        prop_assert_eq!(parse_q(&format_q(&x)).unwrap(), x);
    }

    #[test]
    fn star_is_an_involution(k in 0usize..3, picks in picks()) {
        let model = &models()[k];
        let a = state(model, 3, &picks);
        prop_assert_eq!(star(model, &star(model, &a).unwrap()).unwrap(), a);
    }

    #[test]
    fn modes_are_adjoint_to_starred_modes(
        k in 0usize..3,
        a in picks(),
        b in 0usize..1000,
        c in 0usize..1000,
        n in -2i64..=2,
    ) {
        let model = &models()[k];
        let a = state(model, 2, &a);
        let top = model.truncation() - 2;
        let b = StateVector::basis(b % model.basis().range(top).end);
        let c = StateVector::basis(c % model.basis().range(top).end);
        let a_star = star(model, &a).unwrap();
        let left = model.inner(&b, &StateVector::from_qvec(apply_mode(model, &a, n, c.coeffs()).unwrap()));
        let right = model.inner(&StateVector::from_qvec(apply_mode(model, &a_star, -n, b.coeffs()).unwrap()), &c);
        prop_assert_eq!(left, right);
    }

    #[test]
    fn graded_norms_grow_with_n(k in 0usize..3, picks in picks(), m in -3i64..=3) {
        let model = &models()[k];
        let lab = NormLab::new(model).unwrap();
        let a = state(model, 2, &picks);
        let top = model.truncation() as i64 - m.abs();
        let norms: Vec<f64> = (0..=top).map(|n| lab.graded_norm(&a, m, n).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12), "{norms:?}");
        }
    }

    #[test]
    fn fitted_bound_majorizes_every_cell(
        values in prop::collection::vec(prop::option::of(1e-6f64..1e6), 1..40),
    ) {
        let cells: Vec<NormCell> = values
            .iter()
            .enumerate()
            .map(|(i, v)| NormCell { m: i as i64 % 7 - 3, n: i as i64 / 7, norm: *v })
            .collect();
        let table = table_with(cells);
        match fit_exponents(&table) {
            Ok(fit) => {
                prop_assert!(fit.s >= 0.0 && fit.t >= 0.0);
                for (m, n, x) in table.values() {
                    prop_assert!(fit.bound(m, n) >= x * (1.0 - 1e-12), "{fit:?} at ({m}, {n}): {x}");
                }
            }
            Err(_) => prop_assert!(values.iter().all(Option::is_none)),
        }
    }

    #[test]
    fn norm_tables_round_trip_through_json(
        values in prop::collection::vec(prop::option::of(any::<f64>().prop_filter("finite", |x| x.is_finite())), 0..30),
    ) {
        let cells = values.iter().enumerate().map(|(i, v)| NormCell { m: i as i64 - 5, n: i as i64, norm: *v }).collect();
        let table = table_with(cells);
        prop_assert_eq!(NormTable::from_json(&table.to_json().unwrap()).unwrap(), table);
    }

    #[test]
    fn bootstrap_verdicts_are_consistent(k in prop::collection::vec(0.0f64..1e3, 2..12)) {
        if let Ok(report) = bootstrap_fit(&k, &[1, 2], 4.0) {
            match &report.verdict {
                BootstrapVerdict::Certified { constant, exponent } => {
                    for (n, x) in k.iter().enumerate() {
                        let bound = constant * (1.0 + n as f64).powf(*exponent);
                        prop_assert!(*x <= bound * (1.0 + 1e-9), "K({n}) = {x} > {bound}");
                    }
                }
                BootstrapVerdict::GrowthDetected { n_bar, alpha, .. } => {
                    prop_assert!(*alpha > 1.0);
                    prop_assert_eq!(report.alpha[*n_bar], *alpha);
                }
                BootstrapVerdict::Inconclusive { lhs, rhs, .. } => prop_assert!(lhs > rhs),
            }
        }
    }
}

fn table_with(cells: Vec<NormCell>) -> NormTable {
    NormTable {
        schema: NormTable::SCHEMA.into(),
        model: "synthetic".into(),
        model_hash: String::new(),
        state: "a".into(),
        truncation: 8,
        tolerance: 1e-9,
        cells,
    }
}

#[test]
fn conformal_vector_is_self_adjoint() {
    for model in models() {
        let nu = model.conformal_state();
        assert_eq!(star(model, nu).unwrap(), *nu);
        assert_eq!(model.inner(nu, nu), model.central_charge() / q_int(2));
    }
}
