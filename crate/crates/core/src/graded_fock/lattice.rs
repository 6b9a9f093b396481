//! Free-field realization of `Y(e^{jγ}, z)` on the rank-one lattice Fock
//! spaces, with the trivial cocycle.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

use num::{BigInt, One, Zero};

use super::basis::{partitions, BasisState, Factor, GradedBasis};
use crate::linalg::QVec;
use crate::rational::{binomial, factorial, Q};

/// Oscillator word: parts ascending, i.e. `γ_{-p1} γ_{-p2} ...` with
/// `p1 <= p2 <= ...`.
type Word = Vec<usize>;
type Fock = BTreeMap<Word, Q>;
type Terms = Arc<Vec<(Word, Q)>>;

fn add(target: &mut Fock, w: Word, c: Q) {
    if c.is_zero() {
        return;
    }
    let slot = target.entry(w.clone()).or_insert_with(Q::zero);
    *slot += c;
    if slot.is_zero() {
        target.remove(&w);
    }
}

/// `Σ_{λ ⊢ s} j^{ℓ(λ)}/z_λ γ_{-λ}`, the degree-`s` part of
/// `exp(Σ_{n>0} j γ_{-n} y^n / n)`, with `z_λ = Π n^{m_n} m_n!`.
fn raising_polynomial(j: i64, s: usize) -> Terms {
    static CACHE: OnceLock<RwLock<HashMap<(i64, usize), Terms>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.read().expect("lock").get(&(j, s)) {
        return hit.clone();
    }
    let terms: Vec<(Word, Q)> = partitions(s, 1)
        .into_iter()
        .map(|mut parts| {
            parts.sort_unstable();
            let mut z = BigInt::one();
            let mut i = 0;
            while i < parts.len() {
                let n = parts[i];
                let mult = parts[i..].iter().take_while(|&&p| p == n).count();
                z *= BigInt::from(n).pow(mult as u32) * factorial(mult as u64);
                i += mult;
            }
            let c = Q::new(BigInt::from(j).pow(parts.len() as u32), z);
            (parts, c)
        })
        .collect();
    let terms = Arc::new(terms);
    cache.write().expect("lock").insert((j, s), terms.clone());
    terms
}

/// Sub-multisets `μ ⊆ w` with `Σ μ = r` removed from `w`, weighted by
/// `Π_n (-jq)^{m_n} C(c_n, m_n)`: the action of the degree-`r` part of
/// `exp(-Σ_{n>0} j γ_n y^n / n)` on the word `w`.
fn lowered_terms(w: &[usize], j: i64, q: u32, r: usize) -> Vec<(Word, Q)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &p in w {
        match groups.last_mut() {
            Some((n, c)) if *n == p => *c += 1,
            _ => groups.push((p, 1)),
        }
    }
    let base = BigInt::from(-j * q as i64);
    let mut out = Vec::new();
    let mut chosen = vec![0usize; groups.len()];
    fn walk(
        groups: &[(usize, usize)],
        idx: usize,
        left: usize,
        chosen: &mut Vec<usize>,
        base: &BigInt,
        out: &mut Vec<(Word, Q)>,
    ) {
        if idx == groups.len() {
            if left != 0 {
                return;
            }
            let mut coeff = BigInt::one();
            let mut rest = Vec::new();
            for (g, &(n, c)) in groups.iter().enumerate() {
                let m = chosen[g];
                coeff *= base.pow(m as u32) * binomial(c as i64, m as u64);
                rest.extend(std::iter::repeat_n(n, c - m));
            }
            out.push((rest, Q::from_integer(coeff)));
            return;
        }
        let (n, c) = groups[idx];
        for m in 0..=c.min(left / n) {
            chosen[idx] = m;
            walk(groups, idx + 1, left - m * n, chosen, base, out);
        }
        chosen[idx] = 0;
    }
    walk(&groups, 0, r, &mut chosen, &base, &mut out);
    out
}

fn merge(a: &[usize], b: &[usize]) -> Word {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() && k < b.len() {
        if a[i] <= b[k] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[k]);
            k += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[k..]);
    out
}

/// Column of the plain mode `(e^{jγ})_m` at source basis index `u`.
pub(crate) fn exponential_column(basis: &GradedBasis, q: u32, j: i64, m: i64, u: usize) -> QVec {
    let n = basis.truncation() as i64;
    let src = basis.state(u);
    let d = basis.degree(u) as i64;
    let target = d - m;
    let k = src.sector;
    let kt = k + j;
    let ground = |s: i64| s * s * q as i64 / 2;
    if target < 0 || target > n || target < ground(kt) {
        return QVec::new();
    }
    let f_t = target - ground(kt);
    let f_w = d - ground(k);
    let word: Word = src.factors.iter().map(Factor::weight).collect();

    // exp(-Σ jγ_n z^{-n}/n) lowers by r, exp(Σ jγ_{-n} z^n/n) raises by s
    let mut result = Fock::new();
    for r in 0..=f_w {
        let s = f_t - f_w + r;
        if s < 0 {
            continue;
        }
        let raise = raising_polynomial(j, s as usize);
        for (rest, c) in lowered_terms(&word, j, q, r as usize) {
            for (lam, cl) in raise.iter() {
                add(&mut result, merge(&rest, lam), &c * cl);
            }
        }
    }

    QVec::from_terms(result.into_iter().map(|(w, c)| {
        let state = BasisState::new(kt, w.iter().map(|&p| Factor::new(0, -(p as i32))).collect());
        let idx = basis.index_of(&state).expect("vertex operator image stays inside the truncation");
        (idx, c)
    }))
}
