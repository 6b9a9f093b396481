//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voa_core::axioms::{check_tuples, generator_sweep, sample_tuples, AxiomKind};
use voa_core::certify::{
    bootstrap_analyze, bootstrap_fit, certify_orbifold_chain, certify_primary_bound, certify_product_lemma,
    certify_v1_bound, certify_virasoro_bound, lattice_top_norms, orbifold_average, trace_domination_check,
    BootstrapVerdict, BoundReport,
};
use voa_core::config::{parse_state, CheckSpec, ModelEntry};
use voa_core::norms::NormLab;
use voa_core::rational::{q_frac, q_int};
use voa_core::suite::{Outcome, EXIT_VIOLATION};
use voa_core::unitary::{norm_squared, unitarity_report};
use voa_core::{
    automorphism_matrices, build_model, run_certification_suite, AutomorphismKind, BasisState, Factor, Model,
    ModelSpec, Mutation, QMat, StateVector, SuiteConfig, VoaError,
};

const BOUND_TOLERANCE: f64 = 1e-8;
const NORM_TOLERANCE: f64 = 1e-9;
const AXIOM_TUPLES: usize = 500;
const AXIOM_BUDGET: Duration = Duration::from_secs(120);
const BOUND_BUDGET: Duration = Duration::from_secs(300);

type Criterion = Result<String, String>;
type Run<'a> = Box<dyn FnOnce() -> Criterion + 'a>;

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn err(e: VoaError) -> String {
    e.to_string()
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / 1f64.max(x.abs()).max(y.abs())
}

fn base_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::heisenberg(1, 8),
        ModelSpec::virasoro(q_frac(1, 2), 8),
        ModelSpec::virasoro(q_int(1), 8),
        ModelSpec::lattice(2, 6),
    ]
}

fn axioms() -> Criterion {
    let start = Instant::now();
    let mut total = 0;
    for spec in base_models() {
        let model = build_model(&spec).map_err(err)?;
        for kind in AxiomKind::ALL {
            let tuples = sample_tuples(&model, kind, AXIOM_TUPLES, 1);
            check(
                tuples.len() >= AXIOM_TUPLES,
                format!("{} {}: only {} tuples", spec.label(), kind.name(), tuples.len()),
            )?;
            let s = check_tuples(&model, kind.name(), &tuples).map_err(err)?;
            check(s.nonzero == 0, format!("{} {}: {:?}", spec.label(), kind.name(), s.first_failure))?;
            total += s.tuples;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed <= AXIOM_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{total} tuples exactly zero in {:.1}s", elapsed.as_secs_f64()))
}

fn unitarity() -> Criterion {
    for spec in base_models() {
        let model = build_model(&spec).map_err(err)?;
        let r = unitarity_report(&model).map_err(err)?;
        check(r.hermitian && r.positive_definite && r.pass, format!("{}: {r:?}", spec.label()))?;
        // (ν|ν) = c/2, c taken from the spec rather than the model
        let c = match &spec.kind {
            voa_core::ModelKind::Virasoro { c } => c.clone(),
            _ => q_int(1),
        };
        let nu = norm_squared(&model, model.conformal_state());
        check(nu == c / q_int(2), format!("{}: (ν|ν) = {nu}", spec.label()))?;
    }
    let h = build_model(&ModelSpec::heisenberg(1, 8)).map_err(err)?;
    let g2 = h.gram_block(2);
    let mut expected = QMat::zeros(2, 2);
    expected.set(0, 0, q_int(2));
    expected.set(1, 1, q_int(2));
    check(*g2 == expected, format!("Heisenberg G_2 = {g2:?}"))?;
    Ok("4 models Hermitian and positive definite, G_2 = diag(2,2), (ν|ν) = c/2 exactly".into())
}

fn norm_oracles(shipped: &voa_core::ReportBundle) -> Criterion {
    let h = build_model(&ModelSpec::heisenberg(1, 12)).map_err(err)?;
    let lab = NormLab::new(&h).map_err(err)?;
    let a = parse_state(&h, "a0").map_err(err)?;
    for n in 0..=10i64 {
        let up = lab.graded_norm(&a, -1, n).map_err(err)?;
        let down = lab.graded_norm(&a, 1, n).map_err(err)?;
        check(rel(up, ((n + 1) as f64).sqrt()) <= NORM_TOLERANCE, format!("‖α_-1‖_{n} = {up}"))?;
        check(rel(down, (n as f64).sqrt()) <= NORM_TOLERANCE, format!("‖α_1‖_{n} = {down}"))?;
    }
    for model in [&h, &build_model(&ModelSpec::virasoro(q_frac(1, 2), 10)).map_err(err)?] {
        let lab = NormLab::new(model).map_err(err)?;
        let nu = model.conformal_state();
        let top = model.truncation() as i64;
        let l0 = lab.mode(nu, 0, top).map_err(err)?;
        for d in 0..=top as usize {
            let dim = model.basis().dim(d);
            let mut expected = QMat::zeros(dim, dim);
            for i in 0..dim {
                expected.set(i, i, q_int(d as i64));
            }
            check(l0.block(model.basis(), d) == expected, format!("L_0 is not {d} on degree {d}"))?;
        }
        // n itself, or the highest occupied degree below it (Virasoro has no degree 1)
        for n in 0..=top {
            let x = lab.graded_norm(nu, 0, n).map_err(err)?;
            let expected = (0..=n).rev().find(|&d| model.basis().dim(d as usize) > 0).unwrap_or(0);
            check(rel(x, expected as f64) <= 1e-12, format!("{}: ‖L_0‖_{n} = {x}", model.spec().label()))?;
        }
    }
    let mut tables = 0;
    let mut cells = 0;
    for e in &shipped.entries {
        if let Outcome::NormTable { identities, .. } = &e.outcome {
            check(
                identities.cstar_gap <= NORM_TOLERANCE && identities.shift_gap <= NORM_TOLERANCE,
                format!("{} {}: {identities:?}", identities.model, identities.state),
            )?;
            tables += 1;
            cells += identities.cells;
        }
    }
    check(tables > 0, "no norm tables shipped")?;
    Ok(format!("ladder and L_0 oracles hold, identities hold on {tables} shipped tables ({cells} cells)"))
}

fn pinned(reports: Vec<BoundReport>, what: &str) -> Result<usize, String> {
    let mut cells = 0;
    for r in reports {
        let r = r.with_tolerance(BOUND_TOLERANCE);
        check(r.pass, format!("{what} {} on {}: {:?}", r.check, r.state, r.violations().next()))?;
        cells += r.cells.len();
    }
    Ok(cells)
}

fn bounds() -> Criterion {
    let start = Instant::now();
    let mut cells = 0;
    for c in [q_frac(1, 2), q_int(1)] {
        let model = build_model(&ModelSpec::virasoro(c.clone(), 16)).map_err(err)?;
        let lab = NormLab::new(&model).map_err(err)?;
        let r = certify_virasoro_bound(&lab, model.conformal_state(), 6, 10).map_err(err)?;
        let c_f = voa_core::rational::q_to_f64(&c);
        check(rel(r.constants["r"], 1.0 + (c_f / 3.0).sqrt()) <= 1e-15, "Virasoro constant")?;
        check(r.window.m_max == 6 && r.window.n_max == 10, "Virasoro window")?;
        cells += pinned(vec![r], "virasoro")?;
    }
    let h = build_model(&ModelSpec::heisenberg(1, 14)).map_err(err)?;
    let l = build_model(&ModelSpec::lattice(2, 14)).map_err(err)?;
    // ‖α‖ = 1, ‖γ_{-1}Ω‖ = √⟨γ,γ⟩ and ‖e^γ + e^{-γ}‖ = √2
    for (model, state, norm) in [(&h, "a0", 1.0), (&l, "a", 2f64.sqrt()), (&l, "e+ + e-", 2f64.sqrt())] {
        let lab = NormLab::new(model).map_err(err)?;
        let r = certify_v1_bound(&lab, &parse_state(model, state).map_err(err)?, 6, 8).map_err(err)?;
        check(rel(r.constants["constant"], 2f64.powf(1.5) * norm) <= 1e-15, format!("V1 constant for {state}"))?;
        cells += pinned(vec![r], "v1")?;
    }
    for spec in [
        ModelSpec::heisenberg(1, 8),
        ModelSpec::virasoro(q_frac(1, 2), 8),
        ModelSpec::virasoro(q_int(1), 8),
        ModelSpec::lattice(2, 8),
    ] {
        let model = build_model(&spec).map_err(err)?;
        let lab = NormLab::new(&model).map_err(err)?;
        for i in 0..model.basis().range(2).end {
            let reports = certify_product_lemma(&lab, &StateVector::basis(i), 4, 8).map_err(err)?;
            cells += pinned(reports, &spec.label())?;
        }
    }
    let l4 = build_model(&ModelSpec::lattice(4, 12)).map_err(err)?;
    let lab = NormLab::new(&l4).map_err(err)?;
    let reports = certify_primary_bound(&lab, &parse_state(&l4, "e+").map_err(err)?, 4, 8, None).map_err(err)?;
    // degree 2, c = 1
    let a_const = 2.0 * (1.0 + (1.0f64 / 3.0).sqrt()) + 0.5;
    check(rel(reports[0].constants["A"], a_const) <= 1e-15, "primary constant")?;
    cells += pinned(reports, "primary")?;
    let elapsed = start.elapsed();
    check(elapsed <= BOUND_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{cells} cells certified at tolerance {BOUND_TOLERANCE:e} in {:.1}s", elapsed.as_secs_f64()))
}

fn mechanisms() -> Criterion {
    let h = build_model(&ModelSpec::heisenberg(1, 14)).map_err(err)?;
    let conj = automorphism_matrices(&h, &AutomorphismKind::ChargeConjugation).map_err(err)?;
    let (x, report) = orbifold_average(&h, 1, &[conj]).map_err(err)?;
    let idx = h
        .basis()
        .index_of(&BasisState::new(0, vec![Factor::new(0, -1), Factor::new(0, -1)]))
        .ok_or("α_-1²Ω missing from basis")?;
    check(x == StateVector::basis(idx), format!("average is {}", h.describe_vector(&x)))?;
    check(report.pass, format!("{report:?}"))?;
    let lab = NormLab::new(&h).map_err(err)?;
    let a = parse_state(&h, "a0").map_err(err)?;
    for s in [0.5, 1.0] {
        pinned(vec![certify_orbifold_chain(&lab, &a, &x, s, 10).map_err(err)?], "chain")?;
    }

    let h12 = build_model(&ModelSpec::heisenberg(1, 12)).map_err(err)?;
    let lab = NormLab::new(&h12).map_err(err)?;
    let a = parse_state(&h12, "a0").map_err(err)?;
    for q in [q_frac(1, 4), q_frac(1, 2)] {
        pinned(trace_domination_check(&lab, &a, &q, 12).map_err(err)?, "trace")?;
    }

    let l = build_model(&ModelSpec::lattice(2, 10)).map_err(err)?;
    let k = lattice_top_norms(&NormLab::new(&l).map_err(err)?, 10).map_err(err)?;
    let fit = bootstrap_fit(&k, &[1, 2], 4.0).map_err(err)?;
    check(fit.certified(), format!("lattice K(n) not certified: {:?}", fit.verdict))?;
    let synthetic: Vec<f64> = (0..=10).map(|n| 2f64.powi(n)).collect();
    let growth = bootstrap_analyze(&synthetic, 1.0, 0.0, 1).map_err(err)?;
    let BootstrapVerdict::GrowthDetected { n_bar, .. } = &growth.verdict else {
        return Err(format!("2^n not flagged: {:?}", growth.verdict));
    };
    // α_n = 2^n with D = 1, s = 0, so the first index above 1 is n = 1
    check(*n_bar == 1, format!("growth flagged at n = {n_bar}"))?;
    Ok(format!(
        "average = α_-1²Ω, chain and trace links hold, lattice K(n) certified (D = {:.3}, s = {}, d = {}), 2^n grows from n = {n_bar}",
        fit.d_constant, fit.s, fit.d
    ))
}

fn mutation_config(truncation: usize, mu: Mutation, tuples: usize) -> SuiteConfig {
    let mut config = SuiteConfig::empty();
    config
        .models
        .insert("h".into(), ModelEntry::Heisenberg { rank: Some(1), metric: None, truncation, mutations: vec![mu] });
    config.checks.push(CheckSpec::Axioms { model: "h".into(), tuples, identities: vec![], generator_sweep: true });
    config
}

fn all_mutations(model: &Model) -> Vec<Mutation> {
    let basis = model.basis();
    let n = basis.truncation() as i64;
    let mut out = Vec::new();
    for mode in -n - 1..=n + 1 {
        for source in 0..basis.len() {
            let t = basis.degree(source) as i64 - mode;
            if (0..=n).contains(&t) {
                for target in basis.range(t as usize) {
                    out.push(Mutation { generator: 0, mode, source, target, delta: q_int(1) });
                }
            }
        }
    }
    out
}

fn mutations() -> Criterion {
    let small = build_model(&ModelSpec::heisenberg(1, 4)).map_err(err)?;
    let exhaustive = all_mutations(&small);
    for mu in &exhaustive {
        let bundle = run_certification_suite(&mutation_config(4, mu.clone(), 20)).map_err(err)?;
        check(bundle.exit_code() == EXIT_VIOLATION, format!("N=4 {mu:?}: exit {}", bundle.exit_code()))?;
    }
    let full = build_model(&ModelSpec::heisenberg(1, 8)).map_err(err)?;
    let mut pool = all_mutations(&full);
    let total = pool.len();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    for mu in pool.iter().take(40) {
        let bundle = run_certification_suite(&mutation_config(8, mu.clone(), AXIOM_TUPLES)).map_err(err)?;
        check(bundle.exit_code() == EXIT_VIOLATION, format!("N=8 {mu:?}: exit {}", bundle.exit_code()))?;
    }
    // generator sweep alone on every N=8 entry
    for mu in &pool {
        let model = voa_core::build_model_with(&ModelSpec::heisenberg(1, 8), std::slice::from_ref(mu)).map_err(err)?;
        let s = check_tuples(&model, "sweep", &generator_sweep(&model)).map_err(err)?;
        check(s.nonzero > 0, format!("N=8 {mu:?} undetected"))?;
    }
    Ok(format!(
        "all {} N=4 and 40 sampled N=8 mutations exit 1; all {total} N=8 mutations break an identity",
        exhaustive.len()
    ))
}

fn determinism(first: &str) -> Criterion {
    let second = run_certification_suite(&SuiteConfig::default_suite()).map_err(err)?.to_json().map_err(err)?;
    check(first.as_bytes() == second.as_bytes(), "reports differ")?;
    Ok(format!("{} bytes identical", first.len()))
}

fn main() {
    let start = Instant::now();
    let shipped = run_certification_suite(&SuiteConfig::default_suite()).expect("default suite runs");
    let shipped_json = shipped.to_json().expect("report serializes");
    let criteria: Vec<(&str, Run)> = vec![
        ("axioms", Box::new(axioms)),
        ("unitarity", Box::new(unitarity)),
        ("norm oracles", Box::new(|| norm_oracles(&shipped))),
        ("bound certification", Box::new(bounds)),
        ("orbifold, trace and bootstrap", Box::new(mechanisms)),
        ("mutation sensitivity", Box::new(mutations)),
        ("determinism", Box::new(|| determinism(&shipped_json))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "default suite exit {}, {} checks; acceptance {:.1}s",
        shipped.exit_code(),
        shipped.summary.checks,
        start.elapsed().as_secs_f64()
    );
    if shipped.exit_code() != 0 {
        failed += 1;
        println!("FAIL default suite: exit {}", shipped.exit_code());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
