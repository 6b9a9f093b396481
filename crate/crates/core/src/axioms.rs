//! Randomized and exhaustive sweeps of the axiom residuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graded_fock::{Model, StateVector};
use crate::mode_engine::{
    borcherds_residual, commutator_residual, skewsymmetry_residual, translation_residual, Residual,
};
use crate::rational::{serde_q, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomKind {
    Borcherds,
    Skewsymmetry,
    Commutator,
    Translation,
}

impl AxiomKind {
    pub const ALL: [AxiomKind; 4] =
        [AxiomKind::Borcherds, AxiomKind::Skewsymmetry, AxiomKind::Commutator, AxiomKind::Translation];

    pub fn name(self) -> &'static str {
        match self {
            AxiomKind::Borcherds => "borcherds",
            AxiomKind::Skewsymmetry => "skewsymmetry",
            AxiomKind::Commutator => "commutator",
            AxiomKind::Translation => "translation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// One instance of an identity on basis states. Unused slots are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomTuple {
    pub kind: AxiomKind,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub m: i64,
    pub n: i64,
    pub k: i64,
}

impl AxiomTuple {
    pub fn check(&self, model: &Model) -> Result<Residual> {
        let (a, b, c) = (StateVector::basis(self.a), StateVector::basis(self.b), StateVector::basis(self.c));
        match self.kind {
            AxiomKind::Borcherds => borcherds_residual(model, &a, &b, &c, self.m, self.n, self.k),
            AxiomKind::Skewsymmetry => skewsymmetry_residual(model, &a, &b, self.n),
            AxiomKind::Commutator => commutator_residual(model, &a, self.m, &b, self.n),
            AxiomKind::Translation => translation_residual(model, &a, self.n),
        }
    }

    pub fn describe(&self, model: &Model) -> String {
        let s = |i: usize| model.describe_state(i);
        match self.kind {
            AxiomKind::Borcherds => {
                format!("a={} b={} c={} (m,n,k)=({},{},{})", s(self.a), s(self.b), s(self.c), self.m, self.n, self.k)
            }
            AxiomKind::Skewsymmetry => format!("a={} b={} n={}", s(self.a), s(self.b), self.n),
            AxiomKind::Commutator => format!("a={} b={} (p,q)=({},{})", s(self.a), s(self.b), self.m, self.n),
            AxiomKind::Translation => format!("a={} n={}", s(self.a), self.n),
        }
    }
}

/// Basis index with degree drawn uniformly from `0..=max_degree` first, so
/// that low degrees are not swamped by the large top levels.
fn pick_state(model: &Model, rng: &mut ChaCha8Rng, max_degree: usize) -> usize {
    let basis = model.basis();
    loop {
        let d = rng.gen_range(0..=max_degree.min(basis.truncation()));
        let r = basis.range(d);
        if !r.is_empty() {
            return rng.gen_range(r);
        }
    }
}

fn candidate(model: &Model, kind: AxiomKind, rng: &mut ChaCha8Rng) -> Option<AxiomTuple> {
    let n_trunc = model.truncation() as i64;
    let half = model.truncation().div_ceil(2);
    let deg = |i: usize| model.basis().degree(i) as i64;
    let mut t = AxiomTuple { kind, a: 0, b: 0, c: 0, m: 0, n: 0, k: 0 };
    match kind {
        AxiomKind::Borcherds => {
            t.a = pick_state(model, rng, half);
            t.b = pick_state(model, rng, half);
            t.c = pick_state(model, rng, half);
            t.m = rng.gen_range(-2..=3);
            t.n = rng.gen_range(-2..=3);
            t.k = rng.gen_range(-2..=3);
            let (da, db, dc) = (deg(t.a), deg(t.b), deg(t.c));
            let f = da + db + dc - t.m - t.n - t.k - 2;
            let required = f.max(da + db - t.n - 1).max(db + dc - t.k - 1).max(da + dc - t.m - 1);
            (f >= 0 && required <= n_trunc).then_some(t)
        }
        AxiomKind::Skewsymmetry => {
            t.a = pick_state(model, rng, half);
            t.b = pick_state(model, rng, half);
            t.n = rng.gen_range(-2..=3);
            let top = deg(t.a) + deg(t.b) - t.n - 1;
            (top >= 0 && top <= n_trunc).then_some(t)
        }
        AxiomKind::Commutator => {
            t.a = pick_state(model, rng, half);
            t.b = pick_state(model, rng, half);
            t.m = rng.gen_range(-3..=3);
            t.n = rng.gen_range(-3..=3);
            (deg(t.a) + deg(t.b) - 1 <= n_trunc).then_some(t)
        }
        AxiomKind::Translation => {
            t.a = pick_state(model, rng, model.truncation() - 1);
            t.n = rng.gen_range(-3..=3);
            (deg(t.a) < n_trunc).then_some(t)
        }
    }
}

/// `count` valid tuples of the given kind, reproducible from `seed`.
pub fn sample_tuples(model: &Model, kind: AxiomKind, count: usize, seed: u64) -> Vec<AxiomTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(t) = candidate(model, kind, &mut rng) {
            out.push(t);
        }
    }
    out
}

/// Commutators of every pair of generators, all mode pairs that touch the
/// truncation. Catches any single corrupted generator entry.
pub fn generator_sweep(model: &Model) -> Vec<AxiomTuple> {
    let gens: Vec<usize> = model.generators().iter().map(|g| g.state).collect();
    let bound = model.truncation() as i64 + 1;
    let mut out = Vec::new();
    for &a in &gens {
        for &b in &gens {
            for m in -bound..=bound {
                for n in -bound..=bound {
                    out.push(AxiomTuple { kind: AxiomKind::Commutator, a, b, c: 0, m, n, k: 0 });
                }
            }
        }
    }
    out
}

/// Aggregate of many residual checks of one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomSummary {
    pub model: String,
    pub identity: String,
    pub tuples: usize,
    pub nonzero: usize,
    #[serde(with = "serde_q")]
    pub max_abs: Q,
    pub first_failure: Option<String>,
}

impl AxiomSummary {
    pub fn pass(&self) -> bool {
        self.nonzero == 0
    }
}

/// Checks all tuples in parallel; results are merged in input order.
pub fn check_tuples(model: &Model, identity: &str, tuples: &[AxiomTuple]) -> Result<AxiomSummary> {
    let residuals: Vec<Residual> = tuples.par_iter().map(|t| t.check(model)).collect::<Result<_>>()?;
    let mut summary = AxiomSummary {
        model: model.spec().label(),
        identity: identity.into(),
        tuples: tuples.len(),
        nonzero: 0,
        max_abs: Q::from_integer(0.into()),
        first_failure: None,
    };
    for (t, r) in tuples.iter().zip(residuals) {
        if r.is_zero() {
            continue;
        }
        summary.nonzero += 1;
        if summary.first_failure.is_none() {
            let witness = r.witness.unwrap_or_default();
            summary.first_failure = Some(format!("{} [{witness}]", t.describe(model)));
        }
        if r.max_abs > summary.max_abs {
            summary.max_abs = r.max_abs;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_fock::{build_model, ModelSpec};

    #[test]
    fn sampled_tuples_are_valid_and_reproducible() {
        let model = build_model(&ModelSpec::heisenberg(1, 6)).unwrap();
        for kind in AxiomKind::ALL {
            let a = sample_tuples(&model, kind, 20, 7);
            assert_eq!(a, sample_tuples(&model, kind, 20, 7));
            for t in &a {
                assert!(t.check(&model).unwrap().is_zero(), "{}", t.describe(&model));
            }
        }
    }
}
