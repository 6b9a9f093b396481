//! Monomial automorphisms (charge conjugation, torus phases) with exact
//! phases `exp(2πi t)`, `t` rational.

use std::collections::BTreeMap;

use num::Zero;
use serde::{Deserialize, Serialize};

use super::basis::BasisState;
use super::model::Model;
use super::spec::ModelKind;
use super::state::StateVector;
use crate::error::{Result, VoaError};
use crate::mode_engine::state_product;
use crate::rational::{q_frac, q_int, q_to_f64, serde_q, sign, Q};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AutomorphismKind {
    /// `α ↦ -α`, `e^{kγ} ↦ e^{-kγ}`.
    ChargeConjugation,
    /// Charge sector `k` multiplied by `exp(2πi k t)`.
    TorusPhase {
        #[serde(with = "serde_q")]
        turns: Q,
    },
}

/// The number `coeff · exp(2πi turns)`, normalized so that equal numbers
/// have equal representations (`turns ∈ [0, 1/2)`, zero has `turns = 0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Phased {
    pub coeff: Q,
    pub turns: Q,
}

impl Phased {
    pub fn new(coeff: Q, turns: Q) -> Self {
        if coeff.is_zero() {
            return Self { coeff, turns: Q::zero() };
        }
        let mut t = &turns - turns.floor();
        let mut c = coeff;
        let half = q_frac(1, 2);
        if t >= half {
            t -= half;
            c = -c;
        }
        Self { coeff: c, turns: t }
    }

    pub fn real(coeff: Q) -> Self {
        Self::new(coeff, Q::zero())
    }

    pub fn times(&self, coeff: &Q, turns: &Q) -> Self {
        Self::new(&self.coeff * coeff, &self.turns + turns)
    }

    pub fn to_complex(&self) -> (f64, f64) {
        let angle = 2.0 * std::f64::consts::PI * q_to_f64(&self.turns);
        let c = q_to_f64(&self.coeff);
        (c * angle.cos(), c * angle.sin())
    }
}

/// A vector whose coefficients carry exact phases. Only produced by monomial
/// maps, so each entry is a single phased number.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhasedVector(BTreeMap<usize, Phased>);

impl PhasedVector {
    pub fn from_state(v: &StateVector) -> Self {
        Self(v.coeffs().iter().map(|(i, c)| (i, Phased::real(c.clone()))).collect())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &Phased)> + '_ {
        self.0.iter().map(|(i, p)| (*i, p))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn scaled(&self, coeff: &Q, turns: &Q) -> Self {
        Self(self.0.iter().map(|(i, p)| (*i, p.times(coeff, turns))).filter(|(_, p)| !p.coeff.is_zero()).collect())
    }
}

/// Image of every basis vector: `e_i ↦ coeff · exp(2πi turns) · e_target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automorphism {
    pub kind: AutomorphismKind,
    images: Vec<(usize, Q, Q)>,
}

impl Automorphism {
    pub fn image(&self, i: usize) -> (usize, &Q, &Q) {
        let (t, c, p) = &self.images[i];
        (*t, c, p)
    }

    pub fn apply(&self, v: &StateVector) -> PhasedVector {
        let mut out = BTreeMap::new();
        for (i, x) in v.coeffs().iter() {
            let (t, c, p) = &self.images[i];
            out.insert(*t, Phased::new(x * c, p.clone()));
        }
        PhasedVector(out)
    }

    /// `g(v) = v` exactly.
    pub fn fixes(&self, v: &StateVector) -> bool {
        self.apply(v) == PhasedVector::from_state(v)
    }

    /// Block of degree `d` as a pair of real and imaginary parts.
    pub fn block_complex(&self, model: &Model, d: usize) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
        let r = model.basis().range(d);
        let n = r.len();
        let mut re = nalgebra::DMatrix::zeros(n, n);
        let mut im = nalgebra::DMatrix::zeros(n, n);
        for (j, i) in r.clone().enumerate() {
            let (t, c, p) = &self.images[i];
            let (x, y) = Phased::new(c.clone(), p.clone()).to_complex();
            re[(t - r.start, j)] = x;
            im[(t - r.start, j)] = y;
        }
        (re, im)
    }

    /// Preserves degrees, fixes `Ω` and `ν`, and preserves the Gram form
    /// exactly.
    pub fn is_unitary(&self, model: &Model) -> bool {
        let basis = model.basis();
        for (i, (t, _, _)) in self.images.iter().enumerate() {
            if basis.degree(*t) != basis.degree(i) {
                return false;
            }
        }
        for d in 0..=model.truncation() {
            let r = basis.range(d);
            let g = model.gram_block(d);
            for i in r.clone() {
                for j in r.clone() {
                    let gij = g.get(i - r.start, j - r.start);
                    let (ti, ci, pi) = &self.images[i];
                    let (tj, cj, pj) = &self.images[j];
                    let image = g.get(ti - r.start, tj - r.start) * ci * cj;
                    if image != *gij {
                        return false;
                    }
                    // g(e_i)ᴴ G g(e_j) picks up exp(2πi (p_j - p_i))
                    if !gij.is_zero() && !(pj - pi).is_integer() {
                        return false;
                    }
                }
            }
        }
        self.fixes(&StateVector::basis(0)) && self.fixes(model.conformal_state())
    }

    /// Checks `g(a_{(n)}b) = (ga)_{(n)}(gb)` for basis states `a`, `b`.
    pub fn respects_product(&self, model: &Model, a: usize, b: usize, n: i64) -> Result<bool> {
        let product = state_product(model, &StateVector::basis(a), n, &StateVector::basis(b))?;
        let lhs = self.apply(&product);
        let (ta, ca, pa) = &self.images[a];
        let (tb, cb, pb) = &self.images[b];
        let moved = state_product(model, &StateVector::basis(*ta), n, &StateVector::basis(*tb))?;
        let rhs = PhasedVector::from_state(&moved).scaled(&(ca * cb), &(pa + pb));
        Ok(lhs == rhs)
    }
}

pub fn automorphism_matrices(model: &Model, kind: &AutomorphismKind) -> Result<Automorphism> {
    let basis = model.basis();
    let images = match (kind, &model.spec().kind) {
        (AutomorphismKind::ChargeConjugation, ModelKind::Heisenberg { .. } | ModelKind::Lattice { .. }) => basis
            .states()
            .iter()
            .map(|s| {
                let flipped = BasisState { sector: -s.sector, factors: s.factors.clone() };
                let t = basis.index_of(&flipped).expect("charge conjugate stays in the truncation");
                (t, sign(s.factors.len() as i64), Q::zero())
            })
            .collect(),
        (AutomorphismKind::TorusPhase { turns }, ModelKind::Lattice { .. }) => basis
            .states()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let t = turns * q_int(s.sector);
                (i, q_int(1), &t - t.floor())
            })
            .collect(),
        _ => {
            return Err(VoaError::NotApplicable(format!("{kind:?} is not an automorphism of {}", model.spec().label())))
        }
    };
    Ok(Automorphism { kind: kind.clone(), images })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phased_normal_form() {
        let a = Phased::new(q_int(2), q_frac(3, 4));
        let b = Phased::new(q_int(-2), q_frac(1, 4));
        assert_eq!(a, b);
        assert_eq!(Phased::new(q_int(1), q_int(3)), Phased::real(q_int(1)));
        assert!(Phased::new(q_int(0), q_frac(1, 3)).turns.is_zero());
        assert!(Phased::new(q_int(1), q_frac(1, 3)).turns >= Q::zero());
    }
}
