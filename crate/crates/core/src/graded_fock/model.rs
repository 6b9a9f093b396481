use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use super::basis::{enumerate_basis, BasisState, Factor, GradedBasis};
use super::lattice::exponential_column;
use super::spec::{short_q, ModelKind, ModelSpec};
use super::state::StateVector;
use super::virasoro::{VermaAlgebra, VermaQuotient};
use crate::error::{Result, VoaError};
use crate::linalg::{QMat, QVec};
use crate::mode_engine::ModeMatrix;
use crate::rational::{q_frac, q_int, serde_q, Q};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Weight-one current `α^i` (for lattices, `γ`).
    Current { index: usize },
    /// The Virasoro field itself, state `L_{-2}Ω`.
    Virasoro,
    /// Lattice exponential `e^{jγ}`.
    Exponential { charge: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub kind: GeneratorKind,
    pub dimension: usize,
    /// Global basis index of the generating state.
    pub state: usize,
    /// Index of the generator whose state is this one's adjoint.
    pub star: usize,
}

/// A deliberate corruption of one stored generator matrix entry, used to
/// check that the axiom residuals notice broken structure constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub generator: usize,
    /// Plain mode index.
    pub mode: i64,
    pub source: usize,
    pub target: usize,
    #[serde(with = "serde_q")]
    pub delta: Q,
}

type ColumnKey = (usize, i64, usize);

/// A built truncated VOA. Immutable after construction; the two interior
/// caches are filled idempotently and never change a result.
pub struct Model {
    pub(crate) spec: ModelSpec,
    pub(crate) basis: GradedBasis,
    pub(crate) gram: Vec<QMat>,
    pub(crate) generators: Vec<Generator>,
    pub(crate) generator_of_state: HashMap<usize, usize>,
    pub(crate) conformal: StateVector,
    pub(crate) central_charge: Q,
    pub(crate) verma: Option<VermaQuotient>,
    pub(crate) mutations: Vec<Mutation>,
    pub(crate) gen_modes: RwLock<HashMap<(usize, i64), Arc<ModeMatrix>>>,
    pub(crate) columns: RwLock<HashMap<ColumnKey, Arc<QVec>>>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("spec", &self.spec.label())
            .field("dims", &self.basis.dims())
            .field("c", &short_q(&self.central_charge))
            .finish()
    }
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn truncation(&self) -> usize {
        self.spec.truncation
    }

    pub fn central_charge(&self) -> &Q {
        &self.central_charge
    }

    pub fn conformal_state(&self) -> &StateVector {
        &self.conformal
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn gram_block(&self, degree: usize) -> &QMat {
        &self.gram[degree]
    }

    pub fn gram_blocks(&self) -> &[QMat] {
        &self.gram
    }

    pub fn verma(&self) -> Option<&VermaQuotient> {
        self.verma.as_ref()
    }

    pub fn mutations(&self) -> &[Mutation] {
        &self.mutations
    }

    pub fn max_generator_dimension(&self) -> usize {
        self.generators.iter().map(|g| g.dimension).max().unwrap_or(0)
    }

    /// Largest `|m|` for which generator modes are available.
    pub fn mode_bound(&self) -> i64 {
        (self.truncation() + self.max_generator_dimension()) as i64
    }

    pub fn generator_at_state(&self, i: usize) -> Option<usize> {
        self.generator_of_state.get(&i).copied()
    }

    /// Index of the generator with the given name.
    pub fn generator_by_name(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    /// Plain mode `g_m` of a generator as a matrix over the truncation.
    pub fn generator_mode(&self, gen: usize, m: i64) -> Result<Arc<ModeMatrix>> {
        if gen >= self.generators.len() {
            return Err(VoaError::InvalidSpec(format!("no generator {gen}")));
        }
        if m.abs() > self.mode_bound() {
            return Err(VoaError::ModeOutOfRange { index: m });
        }
        if let Some(hit) = self.gen_modes.read().expect("lock").get(&(gen, m)) {
            return Ok(hit.clone());
        }
        let g = &self.generators[gen];
        let mut mat = match g.kind {
            GeneratorKind::Exponential { charge } => {
                let q = self.lattice_q().expect("exponentials only exist on lattices");
                ModeMatrix::from_columns(&self.basis, g.dimension, m, |u| {
                    exponential_column(&self.basis, q, charge, m, u)
                })
            }
            _ => unreachable!("Fock generator modes are filled at build time"),
        };
        apply_mutations(&mut mat, &self.mutations, gen, m);
        let mat = Arc::new(mat);
        self.gen_modes.write().expect("lock").entry((gen, m)).or_insert(mat.clone());
        Ok(mat)
    }

    pub(crate) fn lattice_q(&self) -> Option<u32> {
        match self.spec.kind {
            ModelKind::Lattice { q } => Some(q),
            _ => None,
        }
    }

    /// The vector a peeled remainder stands for. For Virasoro the remainder of
    /// a quotient-basis word can be a Verma word outside the chosen basis.
    pub(crate) fn rest_vector(&self, rest: &BasisState) -> QVec {
        match &self.verma {
            Some(vq) => {
                let word: Vec<usize> = rest.factors.iter().map(Factor::weight).collect();
                let d: usize = word.iter().sum();
                vq.reduce(&word, self.basis.range(d).start)
            }
            None => QVec::unit(self.basis.index_of(rest).expect("peeled remainder is a basis state")),
        }
    }

    /// Readable label such as `a0_{-1}a0_{-2}|0>` or `a_{-1}|e^{2γ}>`.
    pub fn describe_state(&self, i: usize) -> String {
        let s = self.basis.state(i);
        let mut out = String::new();
        for f in &s.factors {
            let name = match self.spec.kind {
                ModelKind::Virasoro { .. } => "L".to_string(),
                ModelKind::Lattice { .. } => "a".to_string(),
                ModelKind::Heisenberg { .. } => format!("a{}", f.gen),
            };
            let _ = write!(out, "{name}_{{{}}}", f.mode);
        }
        if s.sector == 0 {
            out.push_str("|0>");
        } else {
            let _ = write!(out, "|e^{{{}γ}}>", s.sector);
        }
        out
    }

    pub fn describe_vector(&self, v: &StateVector) -> String {
        if v.is_zero() {
            return "0".into();
        }
        v.coeffs()
            .iter()
            .map(|(i, c)| format!("({}) {}", short_q(c), self.describe_state(i)))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Exact pairing `(u|v)` of two vectors.
    pub fn inner(&self, u: &StateVector, v: &StateVector) -> Q {
        let mut acc = Q::zero();
        for (i, x) in u.coeffs().iter() {
            let d = self.basis.degree(i);
            let range = self.basis.range(d);
            for (j, y) in v.coeffs().iter() {
                if !range.contains(&j) {
                    continue;
                }
                let g = self.gram[d].get(i - range.start, j - range.start);
                if !g.is_zero() {
                    acc += x * y * g;
                }
            }
        }
        acc
    }

    /// Rebuilds the model with corrupted generator entries.
    pub fn with_mutations(&self, mutations: &[Mutation]) -> Result<Model> {
        let mut all = self.mutations.clone();
        all.extend_from_slice(mutations);
        build_model_with(&self.spec, &all)
    }
}

fn apply_mutations(mat: &mut ModeMatrix, mutations: &[Mutation], gen: usize, m: i64) {
    for mu in mutations.iter().filter(|mu| mu.generator == gen && mu.mode == m) {
        mat.add_entry(mu.target, mu.source, &mu.delta);
    }
}

/// Creation/annihilation action of a current `α^i_m` on a basis state.
fn current_column(basis: &GradedBasis, metric: &QMat, lattice_q: Option<u32>, i: usize, m: i64, u: usize) -> QVec {
    let s = basis.state(u);
    match m.signum() {
        -1 => {
            let t = s.with_factor(Factor::new(i as u16, m as i32));
            match basis.index_of(&t) {
                Some(idx) => QVec::unit(idx),
                None => QVec::new(),
            }
        }
        0 => match lattice_q {
            Some(q) if s.sector != 0 => QVec::unit(u).scaled(&q_int(s.sector * q as i64)),
            _ => QVec::new(),
        },
        _ => {
            let mut out = QVec::new();
            let mut seen: Vec<Factor> = Vec::new();
            for f in &s.factors {
                if f.weight() as i64 != m || seen.contains(f) {
                    continue;
                }
                seen.push(*f);
                let c = q_int(s.count(*f) as i64 * m) * metric.get(i, f.gen as usize);
                let rest = s.without_factor(*f).expect("present");
                out.add_term(basis.index_of(&rest).expect("lower state in basis"), &c);
            }
            out
        }
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    build_model_with(spec, &[])
}

/// Builds the model and then applies the given corruptions to the stored
/// generator matrices (the Gram form is computed from the clean data).
pub fn build_model_with(spec: &ModelSpec, mutations: &[Mutation]) -> Result<Model> {
    spec.validate()?;
    let n = spec.truncation;
    if n < 2 {
        return Err(VoaError::InvalidSpec(format!(
            "truncation N = {n} cannot hold the conformal vector (need N >= 2)"
        )));
    }
    let mode_range = |dim: usize| -((n + dim) as i64)..=((n + dim) as i64);

    let mut gen_modes: HashMap<(usize, i64), Arc<ModeMatrix>> = HashMap::new();
    let mut verma = None;
    let basis;
    let mut generators = Vec::new();
    let central_charge;
    let conformal;
    let gram;

    match &spec.kind {
        ModelKind::Heisenberg { .. } | ModelKind::Lattice { .. } => {
            let (metric, lattice_q) = match &spec.kind {
                ModelKind::Heisenberg { metric } => (QMat::from_rows(metric.clone()), None),
                ModelKind::Lattice { q } => (QMat::from_rows(vec![vec![q_int(*q as i64)]]), Some(*q)),
                ModelKind::Virasoro { .. } => unreachable!(),
            };
            basis = enumerate_basis(spec)?;
            let rank = metric.rows();
            for i in 0..rank {
                let state =
                    basis.index_of(&BasisState::new(0, vec![Factor::new(i as u16, -1)])).expect("degree one present");
                let name = if lattice_q.is_some() { "a".to_string() } else { format!("a{i}") };
                generators.push(Generator {
                    name,
                    kind: GeneratorKind::Current { index: i },
                    dimension: 1,
                    state,
                    star: i,
                });
                for m in mode_range(1) {
                    let mat =
                        ModeMatrix::from_columns(&basis, 1, m, |u| current_column(&basis, &metric, lattice_q, i, m, u));
                    gen_modes.insert((i, m), Arc::new(mat));
                }
            }
            if let Some(q) = lattice_q {
                let d = q as usize / 2;
                let plus = basis.index_of(&BasisState::top(1));
                let minus = basis.index_of(&BasisState::top(-1));
                if let (Some(plus), Some(minus)) = (plus, minus) {
                    generators.push(Generator {
                        name: "e+".into(),
                        kind: GeneratorKind::Exponential { charge: 1 },
                        dimension: d,
                        state: plus,
                        star: 2,
                    });
                    generators.push(Generator {
                        name: "e-".into(),
                        kind: GeneratorKind::Exponential { charge: -1 },
                        dimension: d,
                        state: minus,
                        star: 1,
                    });
                }
            }
            gram = fock_gram(&basis, &gen_modes)?;
            let minv = metric.inverse().expect("metric is positive definite");
            let mut nu = QVec::new();
            for i in 0..rank {
                for j in i..rank {
                    let c = if i == j { minv.get(i, i) * q_frac(1, 2) } else { minv.get(i, j).clone() };
                    let s = BasisState::new(0, vec![Factor::new(i as u16, -1), Factor::new(j as u16, -1)]);
                    nu.add_term(basis.index_of(&s).expect("degree two present"), &c);
                }
            }
            conformal = StateVector::from_qvec(nu);
            central_charge = if lattice_q.is_some() { Q::one() } else { q_int(rank as i64) };
        }
        ModelKind::Virasoro { c } => {
            if *c <= Q::zero() {
                return Err(VoaError::InvalidSpec("Virasoro central charge must be positive".into()));
            }
            let (vq, mut alg) = VermaQuotient::build(c, n)?;
            let levels = (0..=n)
                .map(|d| {
                    vq.quotient_words(d)
                        .map(|w| BasisState::new(0, w.iter().map(|&p| Factor::new(0, -(p as i32))).collect()))
                        .collect()
                })
                .collect();
            basis = GradedBasis::from_levels(levels);
            let state = basis
                .index_of(&BasisState::new(0, vec![Factor::new(0, -2)]))
                .ok_or_else(|| VoaError::InvalidSpec("L_{-2}Ω lies in the radical".into()))?;
            generators.push(Generator {
                name: "L".into(),
                kind: GeneratorKind::Virasoro,
                dimension: 2,
                state,
                star: 0,
            });
            for m in mode_range(2) {
                let mat = ModeMatrix::from_columns(&basis, 2, m, |u| virasoro_column(&basis, &vq, &mut alg, m, u));
                gen_modes.insert((0, m), Arc::new(mat));
            }
            gram = (0..=n).map(|d| vq.quotient_gram(d)).collect();
            conformal = StateVector::basis(state);
            central_charge = c.clone();
            verma = Some(vq);
        }
    }

    for (d, g) in gram.iter().enumerate() {
        if !g.is_symmetric() {
            return Err(VoaError::NonHermitianGram { degree: d });
        }
        if !g.is_positive_definite() {
            return Err(VoaError::NotPositiveDefinite { degree: d });
        }
    }

    let generator_of_state = generators.iter().enumerate().map(|(g, x)| (x.state, g)).collect();
    let model = Model {
        spec: spec.clone(),
        basis,
        gram,
        generators,
        generator_of_state,
        conformal,
        central_charge,
        verma,
        mutations: Vec::new(),
        gen_modes: RwLock::new(gen_modes),
        columns: RwLock::new(HashMap::new()),
    };
    model.mutated(mutations)
}

impl Model {
    /// Applies corruptions to the stored generator matrices of a clean model.
    pub(crate) fn mutated(mut self, mutations: &[Mutation]) -> Result<Model> {
        let basis = &self.basis;
        let gen_modes = self.gen_modes.get_mut().expect("lock");
        for mu in mutations {
            if mu.generator >= self.generators.len() || mu.source >= basis.len() || mu.target >= basis.len() {
                return Err(VoaError::InvalidSpec(format!("mutation {mu:?} refers to a missing entry")));
            }
            if basis.degree(mu.source) as i64 - mu.mode != basis.degree(mu.target) as i64 {
                return Err(VoaError::InvalidSpec(format!("mutation {mu:?} does not respect the grading")));
            }
            if let Some(mat) = gen_modes.get_mut(&(mu.generator, mu.mode)) {
                Arc::make_mut(mat).add_entry(mu.target, mu.source, &mu.delta);
            }
        }
        self.mutations.extend_from_slice(mutations);
        self.columns.get_mut().expect("lock").clear();
        Ok(self)
    }
}

fn virasoro_column(basis: &GradedBasis, vq: &VermaQuotient, alg: &mut VermaAlgebra, m: i64, u: usize) -> QVec {
    let n = basis.truncation() as i64;
    let d = basis.degree(u) as i64;
    let target = d - m;
    if target < 0 || target > n {
        return QVec::new();
    }
    let word: Vec<usize> = basis.state(u).factors.iter().map(Factor::weight).collect();
    let image = alg.apply(m, &word);
    let offset = basis.range(target as usize).start;
    let mut out = QVec::new();
    for (w, c) in image.iter() {
        out.add_scaled(&vq.reduce(w, offset), c);
    }
    out
}

/// Gram blocks of a Fock-type model: `(α_{-p} r | v) = (r | α_p v)` with
/// orthonormal lattice tops.
fn fock_gram(basis: &GradedBasis, modes: &HashMap<(usize, i64), Arc<ModeMatrix>>) -> Result<Vec<QMat>> {
    let mut gram: Vec<QMat> = Vec::new();
    for d in 0..=basis.truncation() {
        let level = basis.level(d);
        let offset = basis.range(d).start;
        let dim = level.len();
        let mut g = QMat::zeros(dim, dim);
        for (i, s) in level.iter().enumerate() {
            let Some((f, rest)) = s.peel() else { continue };
            let p = f.weight();
            let rest_local = basis.local(basis.index_of(&rest).expect("remainder in basis"));
            let lower = &gram[d - p];
            let lower_start = basis.range(d - p).start;
            let op = &modes[&(f.gen as usize, p as i64)];
            for j in 0..dim {
                let v = op.column(offset + j);
                let mut x = Q::zero();
                for (t, c) in v.iter() {
                    let e = lower.get(rest_local, t - lower_start);
                    if !e.is_zero() {
                        x += c * e;
                    }
                }
                g.set(i, j, x);
            }
        }
        for (i, s) in level.iter().enumerate() {
            if !s.is_top() {
                continue;
            }
            for (j, t) in level.iter().enumerate() {
                let x = if t.is_top() { q_int(i64::from(i == j)) } else { g.get(j, i).clone() };
                g.set(i, j, x);
            }
        }
        gram.push(g);
    }
    Ok(gram)
}
