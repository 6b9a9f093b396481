//! Modes `a_{(n)}` / `a_n` of arbitrary states as exact degree-shifting
//! matrices, and residuals of the identities they must satisfy.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::sync::Arc;

use num::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VoaError};
use crate::graded_fock::{GradedBasis, Model, StateVector};
use crate::linalg::{QMat, QVec};
use crate::rational::{binomial_q, factorial, q_int, q_to_f64, serde_q, sign, Q};

/// `Round` indexes by `a_{(n)}`, `Plain` by `a_n = a_{(n+d-1)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Round,
    Plain,
}

pub fn round_to_plain(n: i64, degree: usize) -> i64 {
    n - degree as i64 + 1
}

pub fn plain_to_round(m: i64, degree: usize) -> i64 {
    m + degree as i64 - 1
}

/// A mode restricted to the truncation, stored as sparse columns over the
/// global basis index. Only sources whose image degree lies in `[0, N]`
/// are represented.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeMatrix {
    owner_degree: usize,
    convention: Convention,
    index: i64,
    truncation: usize,
    columns: BTreeMap<usize, QVec>,
}

impl ModeMatrix {
    pub(crate) fn from_columns(
        basis: &GradedBasis,
        owner_degree: usize,
        plain: i64,
        mut f: impl FnMut(usize) -> QVec,
    ) -> Self {
        let mut columns = BTreeMap::new();
        for d in valid_sources(basis.truncation(), plain) {
            for u in basis.range(d) {
                let v = f(u);
                if !v.is_zero() {
                    columns.insert(u, v);
                }
            }
        }
        Self { owner_degree, convention: Convention::Plain, index: plain, truncation: basis.truncation(), columns }
    }

    pub(crate) fn from_map(
        basis: &GradedBasis,
        owner_degree: usize,
        plain: i64,
        columns: BTreeMap<usize, QVec>,
    ) -> Self {
        Self { owner_degree, convention: Convention::Plain, index: plain, truncation: basis.truncation(), columns }
    }

    pub(crate) fn add_entry(&mut self, target: usize, source: usize, delta: &Q) {
        let col = self.columns.entry(source).or_default();
        col.add_term(target, delta);
        if col.is_zero() {
            self.columns.remove(&source);
        }
    }

    pub fn owner_degree(&self) -> usize {
        self.owner_degree
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn index(&self) -> i64 {
        self.index
    }

    pub fn plain_index(&self) -> i64 {
        match self.convention {
            Convention::Plain => self.index,
            Convention::Round => round_to_plain(self.index, self.owner_degree),
        }
    }

    /// Same operator, relabelled in the other convention.
    pub fn relabel(mut self, convention: Convention) -> Self {
        let plain = self.plain_index();
        self.index = match convention {
            Convention::Plain => plain,
            Convention::Round => plain_to_round(plain, self.owner_degree),
        };
        self.convention = convention;
        self
    }

    /// Source degrees whose image stays inside `[0, N]`.
    pub fn source_degrees(&self) -> RangeInclusive<usize> {
        valid_sources(self.truncation, self.plain_index())
    }

    pub fn column(&self, u: usize) -> QVec {
        self.columns.get(&u).cloned().unwrap_or_default()
    }

    pub fn column_ref(&self, u: usize) -> Option<&QVec> {
        self.columns.get(&u)
    }

    pub fn columns(&self) -> impl Iterator<Item = (usize, &QVec)> + '_ {
        self.columns.iter().map(|(u, v)| (*u, v))
    }

    pub fn is_zero(&self) -> bool {
        self.columns.is_empty()
    }

    /// Applies the mode to a vector. Sources mapped below degree 0 are
    /// annihilated; sources mapped above `N` are an error.
    pub fn apply(&self, basis: &GradedBasis, v: &QVec) -> Result<QVec> {
        let m = self.plain_index();
        let mut out = QVec::new();
        for (u, c) in v.iter() {
            let target = basis.degree(u) as i64 - m;
            if target > self.truncation as i64 {
                return Err(VoaError::InsufficientTruncation { required: target as usize, available: self.truncation });
            }
            if let Some(col) = self.columns.get(&u) {
                out.add_scaled(col, c);
            }
        }
        Ok(out)
    }

    /// Dense block from source degree `d` to degree `d - m`
    /// (rows: target, columns: source). Empty when the target is negative.
    pub fn block(&self, basis: &GradedBasis, d: usize) -> QMat {
        let target = d as i64 - self.plain_index();
        if target < 0 || target > self.truncation as i64 || d > self.truncation {
            return QMat::zeros(0, basis.dim(d));
        }
        let tr = basis.range(target as usize);
        let sr = basis.range(d);
        let mut out = QMat::zeros(tr.len(), sr.len());
        for (j, u) in sr.clone().enumerate() {
            if let Some(col) = self.columns.get(&u) {
                for (t, x) in col.iter() {
                    out.set(t - tr.start, j, x.clone());
                }
            }
        }
        out
    }

    pub fn block_f64(&self, basis: &GradedBasis, d: usize) -> nalgebra::DMatrix<f64> {
        let target = d as i64 - self.plain_index();
        if target < 0 || target > self.truncation as i64 || d > self.truncation {
            return nalgebra::DMatrix::zeros(0, basis.dim(d));
        }
        let tr = basis.range(target as usize);
        let sr = basis.range(d);
        let mut out = nalgebra::DMatrix::zeros(tr.len(), sr.len());
        for (j, u) in sr.clone().enumerate() {
            if let Some(col) = self.columns.get(&u) {
                for (t, x) in col.iter() {
                    out[(t - tr.start, j)] = q_to_f64(x);
                }
            }
        }
        out
    }
}

fn valid_sources(n: usize, plain: i64) -> RangeInclusive<usize> {
    let n = n as i64;
    let lo = plain.max(0);
    let hi = n.min(n + plain);
    if lo > hi {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    lo as usize..=hi as usize
}

/// Plain mode of a generator.
pub fn generator_mode(model: &Model, gen: usize, m: i64) -> Result<Arc<ModeMatrix>> {
    model.generator_mode(gen, m)
}

fn apply_generator(model: &Model, gen: usize, m: i64, v: &QVec) -> Result<QVec> {
    if v.is_zero() {
        return Ok(QVec::new());
    }
    model.generator_mode(gen, m)?.apply(&model.basis, v)
}

/// Column `s_k u` for basis states `s`, `u`. The caller guarantees the
/// target degree is at most `N`; every intermediate stays below
/// `max(deg u, deg u - k)`.
pub(crate) fn state_column(model: &Model, s: usize, k: i64, u: usize) -> Result<Arc<QVec>> {
    let d = model.basis.degree(u) as i64;
    if d - k < 0 {
        return Ok(Arc::new(QVec::new()));
    }
    let key = (s, k, u);
    if let Some(hit) = model.columns.read().expect("lock").get(&key) {
        return Ok(hit.clone());
    }
    let v = Arc::new(compute_column(model, s, k, u)?);
    model.columns.write().expect("lock").entry(key).or_insert_with(|| v.clone());
    Ok(v)
}

fn compute_column(model: &Model, s: usize, k: i64, u: usize) -> Result<QVec> {
    let state = model.basis.state(s);
    if s == 0 {
        return Ok(if k == 0 { QVec::unit(u) } else { QVec::new() });
    }
    if let Some(g) = model.generator_at_state(s) {
        return Ok(model.generator_mode(g, k)?.column(u));
    }
    if state.is_top() {
        let q = model.lattice_q().expect("only lattices have charged tops");
        return Ok(crate::graded_fock::lattice::exponential_column(&model.basis, q, state.sector, k, u));
    }

    // s = g_p b with g the leftmost generator factor; use
    // (g_p b)_k = Σ_j (-1)^j C(p+d_g-1, j) [g_{p-j} b_{k-p+j} + (-1)^{p+d_g} b_{k-j+d_g-1} g_{j+1-d_g}]
    let (f, rest) = state.peel().expect("non-top state has a factor");
    let g = f.gen as usize;
    let dg = model.generators[g].dimension as i64;
    let p = f.mode as i64;
    let d = model.basis.degree(u) as i64;
    let db = model.basis.degree(s) as i64 + p;
    let n_round = p + dg - 1;
    let sign2 = sign(p + dg);
    let b = model.rest_vector(&rest);

    let mut out = QVec::new();
    for (bi, bc) in b.iter() {
        let mut acc = QVec::new();
        for j in 0..=(d - k + p).max(-1) {
            let coef = sign(j) * binomial_q(n_round, j as u64);
            if coef.is_zero() {
                continue;
            }
            let inner = state_column(model, bi, k - p + j, u)?;
            let w = apply_generator(model, g, p - j, &inner)?;
            acc.add_scaled(&w, &coef);
        }
        for j in 0..=(d + dg - 1) {
            let coef = sign(j) * binomial_q(n_round, j as u64) * &sign2;
            if coef.is_zero() {
                continue;
            }
            let w = if dg == 2 && j == 0 {
                // b_{k+1} L_{-1} u = L_{-1} b_{k+1} u + (k + d_b) b_k u keeps degrees <= N
                let shifted = state_column(model, bi, k + 1, u)?;
                let mut w = apply_generator(model, g, -1, &shifted)?;
                w.add_scaled(&*state_column(model, bi, k, u)?, &q_int(k + db));
                w
            } else {
                let moved = model.generator_mode(g, j + 1 - dg)?.column(u);
                let mut w = QVec::new();
                for (t, c) in moved.iter() {
                    w.add_scaled(&*state_column(model, bi, k - j + dg - 1, t)?, c);
                }
                w
            };
            acc.add_scaled(&w, &coef);
        }
        out.add_scaled(&acc, bc);
    }
    Ok(out)
}

fn homogeneous_degree(model: &Model, a: &StateVector) -> Result<Option<usize>> {
    a.degree(&model.basis)
}

/// Applies the plain mode `a_k` to `v`.
/// Plain indices shift every component by the same amount, so `a` need not
/// be homogeneous.
pub fn apply_mode(model: &Model, a: &StateVector, k: i64, v: &QVec) -> Result<QVec> {
    let n = model.truncation() as i64;
    let mut out = QVec::new();
    for (u, cu) in v.iter() {
        let target = model.basis.degree(u) as i64 - k;
        if target < 0 {
            continue;
        }
        if target > n {
            return Err(VoaError::InsufficientTruncation { required: target as usize, available: n as usize });
        }
        for (s, cs) in a.coeffs().iter() {
            let col = state_column(model, s, k, u)?;
            out.add_scaled(&col, &(cs * cu));
        }
    }
    Ok(out)
}

/// Applies the round mode `a_{(n)}` to `v`.
pub fn apply_round(model: &Model, a: &StateVector, n: i64, v: &QVec) -> Result<QVec> {
    match homogeneous_degree(model, a)? {
        None => Ok(QVec::new()),
        Some(d) => apply_mode(model, a, round_to_plain(n, d), v),
    }
}

/// Plain mode `a_k` on every source degree whose image stays in the truncation.
pub fn mode_of_state(model: &Model, a: &StateVector, k: i64) -> Result<ModeMatrix> {
    mode_of_state_upto(model, a, k, model.truncation())
}

/// As [`mode_of_state`], restricted to source degrees `<= max_source`.
pub fn mode_of_state_upto(model: &Model, a: &StateVector, k: i64, max_source: usize) -> Result<ModeMatrix> {
    let degree = homogeneous_degree(model, a).ok().flatten().unwrap_or(0);
    let sources: Vec<usize> =
        valid_sources(model.truncation(), k).filter(|&d| d <= max_source).flat_map(|d| model.basis.range(d)).collect();
    let cols: Vec<(usize, QVec)> = sources
        .into_par_iter()
        .map(|u| apply_mode(model, a, k, &QVec::unit(u)).map(|v| (u, v)))
        .collect::<Result<_>>()?;
    let columns = cols.into_iter().filter(|(_, v)| !v.is_zero()).collect();
    Ok(ModeMatrix::from_map(&model.basis, degree, k, columns))
}

/// `a_{(n)} b`.
pub fn state_product(model: &Model, a: &StateVector, n: i64, b: &StateVector) -> Result<StateVector> {
    let (Some(da), Some(db)) = (homogeneous_degree(model, a)?, homogeneous_degree(model, b)?) else {
        return Ok(StateVector::zero());
    };
    let target = da as i64 + db as i64 - n - 1;
    if target > model.truncation() as i64 {
        return Err(VoaError::InsufficientTruncation { required: target as usize, available: model.truncation() });
    }
    Ok(apply_round(model, a, n, b.coeffs())?.into())
}

/// `L_m` applied to a vector.
pub fn apply_virasoro(model: &Model, m: i64, v: &QVec) -> Result<QVec> {
    apply_mode(model, &model.conformal, m, v)
}

/// Outcome of an identity check. `max_abs` is the largest absolute
/// coefficient of the difference of both sides; the identity holds on the
/// checked inputs iff it is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub identity: String,
    pub required_truncation: usize,
    /// Number of source vectors on which both sides were compared.
    pub checked: usize,
    #[serde(with = "serde_q")]
    pub max_abs: Q,
    pub witness: Option<String>,
}

impl Residual {
    pub(crate) fn new(identity: &str, required: usize) -> Self {
        Self { identity: identity.into(), required_truncation: required, checked: 0, max_abs: Q::zero(), witness: None }
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs.is_zero()
    }

    pub(crate) fn record(&mut self, diff: &QVec, source: impl FnOnce() -> String) {
        self.checked += 1;
        if diff.is_zero() {
            return;
        }
        let m = diff.max_abs();
        if self.witness.is_none() {
            let (i, c) = diff.iter().next().expect("nonzero");
            self.witness = Some(format!("{}: coefficient {} at basis index {i}", source(), c));
        }
        if m > self.max_abs {
            self.max_abs = m;
        }
    }

    fn merge(&mut self, other: Residual) {
        self.checked += other.checked;
        self.required_truncation = self.required_truncation.max(other.required_truncation);
        if self.witness.is_none() {
            self.witness = other.witness;
        }
        if other.max_abs > self.max_abs {
            self.max_abs = other.max_abs;
        }
    }
}

fn require(model: &Model, required: i64) -> Result<()> {
    if required > model.truncation() as i64 {
        return Err(VoaError::InsufficientTruncation { required: required as usize, available: model.truncation() });
    }
    Ok(())
}

/// Borcherds identity in the round convention, applied to `c`:
/// `Σ_j C(m,j) (a_{(n+j)}b)_{(m+k-j)} c
///  = Σ_j (-1)^j C(n,j) [a_{(m+n-j)} b_{(k+j)} c - (-1)^n b_{(n+k-j)} a_{(m+j)} c]`.
pub fn borcherds_residual(
    model: &Model,
    a: &StateVector,
    b: &StateVector,
    c: &StateVector,
    m: i64,
    n: i64,
    k: i64,
) -> Result<Residual> {
    let (Some(da), Some(db), Some(dc)) =
        (homogeneous_degree(model, a)?, homogeneous_degree(model, b)?, homogeneous_degree(model, c)?)
    else {
        return Ok(Residual::new("borcherds", 0));
    };
    let (da, db, dc) = (da as i64, db as i64, dc as i64);
    let f = da + db + dc - m - n - k - 2;
    if f < 0 {
        return Ok(Residual::new("borcherds", 0));
    }
    let e0 = da + db - n - 1;
    let f0 = db + dc - k - 1;
    let g0 = da + dc - m - 1;
    let required = f.max(e0).max(f0).max(g0);
    require(model, required)?;

    let mut lhs = QVec::new();
    for j in 0..=e0.max(-1) {
        let coef = binomial_q(m, j as u64);
        if coef.is_zero() {
            continue;
        }
        let ab = state_product(model, a, n + j, b)?;
        lhs.add_scaled(&apply_round(model, &ab, m + k - j, c.coeffs())?, &coef);
    }
    let mut rhs = QVec::new();
    for j in 0..=f0.max(-1) {
        let coef = sign(j) * binomial_q(n, j as u64);
        if coef.is_zero() {
            continue;
        }
        let bc = apply_round(model, b, k + j, c.coeffs())?;
        rhs.add_scaled(&apply_round(model, a, m + n - j, &bc)?, &coef);
    }
    for j in 0..=g0.max(-1) {
        let coef = sign(j + n) * binomial_q(n, j as u64);
        if coef.is_zero() {
            continue;
        }
        let ac = apply_round(model, a, m + j, c.coeffs())?;
        rhs.add_scaled(&apply_round(model, b, n + k - j, &ac)?, &-coef);
    }
    let mut res = Residual::new("borcherds", required as usize);
    lhs.sub_assign(&rhs);
    res.record(&lhs, || format!("(m,n,k)=({m},{n},{k})"));
    Ok(res)
}

fn sources_where(model: &Model, ok: impl Fn(i64) -> bool) -> Vec<usize> {
    (0..=model.truncation()).filter(|&d| ok(d as i64)).flat_map(|d| model.basis.range(d)).collect()
}

/// `[a_p, b_q] = Σ_j C(p+d_a-1, j) (a_{(j)}b)_{p+q}` (plain convention), on
/// every source whose intermediate degrees fit.
pub fn commutator_residual(model: &Model, a: &StateVector, p: i64, b: &StateVector, q: i64) -> Result<Residual> {
    let (Some(da), Some(db)) = (homogeneous_degree(model, a)?, homogeneous_degree(model, b)?) else {
        return Ok(Residual::new("commutator", 0));
    };
    let top = da as i64 + db as i64 - 1;
    require(model, top)?;
    let n = model.truncation() as i64;
    let products: Vec<(Q, StateVector)> = (0..=top.max(-1))
        .filter_map(|j| {
            let coef = binomial_q(p + da as i64 - 1, j as u64);
            (!coef.is_zero()).then_some((j, coef))
        })
        .map(|(j, coef)| state_product(model, a, j, b).map(|s| (coef, s)))
        .collect::<Result<_>>()?;
    let sources = sources_where(model, |d| d - q <= n && d - p <= n && d - p - q <= n);
    let mut res = Residual::new("commutator", top.max(0) as usize);
    let diffs: Vec<(usize, QVec)> = sources
        .into_par_iter()
        .map(|u| {
            let e = QVec::unit(u);
            let mut diff = apply_mode(model, a, p, &apply_mode(model, b, q, &e)?)?;
            diff.sub_assign(&apply_mode(model, b, q, &apply_mode(model, a, p, &e)?)?);
            for (coef, s) in &products {
                diff.add_scaled(&apply_mode(model, s, p + q, &e)?, &-coef.clone());
            }
            Ok((u, diff))
        })
        .collect::<Result<_>>()?;
    for (u, diff) in diffs {
        res.record(&diff, || format!("(p,q)=({p},{q}) on basis index {u}"));
    }
    Ok(res)
}

/// `a_{(n)}b + Σ_j (-1)^{n+j}/j! L_{-1}^j b_{(n+j)} a`, which must vanish.
pub fn skewsymmetry_residual(model: &Model, a: &StateVector, b: &StateVector, n: i64) -> Result<Residual> {
    let (Some(da), Some(db)) = (homogeneous_degree(model, a)?, homogeneous_degree(model, b)?) else {
        return Ok(Residual::new("skewsymmetry", 0));
    };
    let top = da as i64 + db as i64 - n - 1;
    if top < 0 {
        return Ok(Residual::new("skewsymmetry", 0));
    }
    require(model, top)?;
    let mut total = state_product(model, a, n, b)?.into_coeffs();
    for j in 0..=top {
        let mut v = state_product(model, b, n + j, a)?.into_coeffs();
        for _ in 0..j {
            v = apply_virasoro(model, -1, &v)?;
        }
        let coef = sign(n + j) / Q::from_integer(factorial(j as u64));
        total.add_scaled(&v, &coef);
    }
    let mut res = Residual::new("skewsymmetry", top as usize);
    res.record(&total, || format!("n={n}"));
    Ok(res)
}

/// `[L_{-1}, a_n] = (-n-d+1) a_{n-1}`; when `L_1 a = 0` also the
/// quasi-primary family `[L_m, a_n] = ((d-1)m - n) a_{m+n}` for `m ∈ {0, 1}`.
pub fn translation_residual(model: &Model, a: &StateVector, n: i64) -> Result<Residual> {
    let Some(d) = homogeneous_degree(model, a)? else {
        return Ok(Residual::new("translation", 0));
    };
    let d = d as i64;
    require(model, d + 1)?;
    let quasi_primary = apply_virasoro(model, 1, a.coeffs())?.is_zero();
    let big_n = model.truncation() as i64;
    let family: Vec<i64> = if quasi_primary { vec![-1, 0, 1] } else { vec![-1] };
    let mut res = Residual::new("translation", (d + 1) as usize);
    for m in family {
        let sources = sources_where(model, |s| s - m <= big_n && s - n - m <= big_n && s - n <= big_n);
        let coef = q_int((d - 1) * m - n);
        let diffs: Vec<(usize, QVec)> = sources
            .into_par_iter()
            .map(|u| {
                let e = QVec::unit(u);
                let mut diff = apply_virasoro(model, m, &apply_mode(model, a, n, &e)?)?;
                diff.sub_assign(&apply_mode(model, a, n, &apply_virasoro(model, m, &e)?)?);
                diff.add_scaled(&apply_mode(model, a, n + m, &e)?, &-coef.clone());
                Ok((u, diff))
            })
            .collect::<Result<_>>()?;
        let mut part = Residual::new("translation", 0);
        for (u, diff) in diffs {
            part.record(&diff, || format!("[L_{m}, a_{n}] on basis index {u}"));
        }
        res.merge(part);
    }
    Ok(res)
}

/// `a_{(n)}Ω = 0` for `n >= 0` and `a_{(-1)}Ω = a`.
pub fn vacuum_residual(model: &Model, a: &StateVector) -> Result<Residual> {
    let Some(d) = homogeneous_degree(model, a)? else {
        return Ok(Residual::new("vacuum", 0));
    };
    let omega = QVec::unit(0);
    let mut res = Residual::new("vacuum", d);
    let mut creation = apply_round(model, a, -1, &omega)?;
    creation.sub_assign(a.coeffs());
    res.record(&creation, || "a_(-1)Ω - a".into());
    for n in 0..=d as i64 {
        let v = apply_round(model, a, n, &omega)?;
        res.record(&v, || format!("a_({n})Ω"));
    }
    Ok(res)
}

/// Largest absolute entry of an exact difference, as a float (for reports).
pub fn residual_size(r: &Residual) -> f64 {
    q_to_f64(&r.max_abs.abs())
}
