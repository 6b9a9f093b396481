//! The invariant scalar product: Gram blocks, their Cholesky factors, the
//! star involution and the adjoint relations it implies.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VoaError};
use crate::graded_fock::{Model, StateVector};
use crate::linalg::{QMat, QVec};
use crate::mode_engine::{apply_mode, apply_virasoro, mode_of_state, state_product, Residual};
use crate::rational::{q_int, q_to_f64, serde_q, Q};

/// Per-degree Gram data. `chol[d]` is lower triangular with
/// `G_d = L Lᵀ`; `whiten[d] = L^{-T}` maps orthonormal coordinates back to
/// basis coordinates.
#[derive(Clone, Debug)]
pub struct GramFamily {
    exact: Vec<QMat>,
    chol: Vec<DMatrix<f64>>,
    whiten: Vec<DMatrix<f64>>,
    radical: Vec<Vec<Vec<Q>>>,
}

pub fn gram_family(model: &Model) -> Result<GramFamily> {
    let mut chol = Vec::new();
    let mut whiten = Vec::new();
    for (d, g) in model.gram_blocks().iter().enumerate() {
        if !g.is_symmetric() {
            return Err(VoaError::NonHermitianGram { degree: d });
        }
        let n = g.rows();
        if n == 0 {
            chol.push(DMatrix::zeros(0, 0));
            whiten.push(DMatrix::zeros(0, 0));
            continue;
        }
        let c = nalgebra::Cholesky::new(g.to_f64()).ok_or(VoaError::NotPositiveDefinite { degree: d })?;
        let l = c.l();
        let lt_inv = l
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .ok_or(VoaError::NotPositiveDefinite { degree: d })?;
        chol.push(l);
        whiten.push(lt_inv);
    }
    let radical =
        (0..=model.truncation()).map(|d| model.verma().map(|v| v.radical[d].clone()).unwrap_or_default()).collect();
    Ok(GramFamily { exact: model.gram_blocks().to_vec(), chol, whiten, radical })
}

impl GramFamily {
    pub fn truncation(&self) -> usize {
        self.exact.len() - 1
    }

    pub fn block(&self, d: usize) -> &QMat {
        &self.exact[d]
    }

    pub fn cholesky(&self, d: usize) -> &DMatrix<f64> {
        &self.chol[d]
    }

    pub fn whiten(&self, d: usize) -> &DMatrix<f64> {
        &self.whiten[d]
    }

    /// Kernel of the Verma-level form at degree `d` (Virasoro only; empty
    /// otherwise), in Verma word coordinates.
    pub fn radical(&self, d: usize) -> &[Vec<Q>] {
        &self.radical[d]
    }

    /// `Lᵀ_t A L^{-T}_s`: a block map from degree `s` to degree `t` in
    /// orthonormal coordinates, so that its operator norm is the largest
    /// singular value.
    pub fn orthonormal(&self, block: &DMatrix<f64>, source: usize, target: usize) -> DMatrix<f64> {
        self.chol[target].transpose() * block * &self.whiten[source]
    }
}

fn degree_of(model: &Model, a: &StateVector) -> Result<Option<usize>> {
    a.degree(model.basis())
}

/// The unique vector with `((a*)_{-n} b | c) = (b | a_n c)`. For `a` of
/// degree `d` its components `x_e`, `e <= d`, follow from `b = Ω`, `n = e`:
/// `(Ω | a_e c) = Σ_{e' <= e} (L_{-1}^{e-e'}/(e-e')! x_{e'} | c)` for `c ∈ V_e`.
/// Only quasi-primary states have a homogeneous adjoint.
pub fn star(model: &Model, a: &StateVector) -> Result<StateVector> {
    let basis = model.basis();
    let mut components: BTreeMap<usize, StateVector> = BTreeMap::new();
    for (i, c) in a.coeffs().iter() {
        let slot = components.entry(basis.degree(i)).or_insert_with(StateVector::zero);
        *slot = slot.plus(&StateVector::from_terms([(i, c.clone())]));
    }
    let mut out = QVec::new();
    for (d, comp) in components {
        out.add_assign(&star_homogeneous(model, &comp, d)?);
    }
    Ok(StateVector::from_qvec(out))
}

fn star_homogeneous(model: &Model, a: &StateVector, d: usize) -> Result<QVec> {
    let basis = model.basis();
    // lifted[k] = L_{-1}^{e-k}/(e-k)! x_k at the current degree e
    let mut lifted: Vec<QVec> = Vec::new();
    let mut out = QVec::new();
    for e in 0..=d {
        for (k, v) in lifted.iter_mut().enumerate() {
            let steps = (e - k) as i64;
            *v = apply_virasoro(model, -1, v)?.scaled(&Q::new(1.into(), steps.into()));
        }
        let r = basis.range(e);
        if r.is_empty() {
            lifted.push(QVec::new());
            continue;
        }
        let rhs: Vec<Vec<Q>> = r
            .clone()
            .map(|i| Ok(vec![apply_mode(model, a, e as i64, &QVec::unit(i))?.get(0)]))
            .collect::<Result<_>>()?;
        let sol =
            model.gram_block(e).solve(&QMat::from_rows(rhs)).ok_or(VoaError::NotPositiveDefinite { degree: e })?;
        let mut x = QVec::from_terms(r.enumerate().map(|(k, i)| (i, sol.get(k, 0).clone())));
        for v in &lifted {
            x.sub_assign(v);
        }
        out.add_assign(&x);
        lifted.push(x);
    }
    Ok(out)
}

/// Norm squared `(a|a)`, exact.
pub fn norm_squared(model: &Model, a: &StateVector) -> Q {
    model.inner(a, a)
}

/// Largest deviation between the Gram adjoint `G_s⁻¹ Aᵀ G_t` of each block
/// of `a_m` and the corresponding block of `(a*)_{-m}`. Exact; zero when
/// the form is invariant.
pub fn adjoint_residual(model: &Model, a: &StateVector, m: i64) -> Result<f64> {
    let Some(_) = degree_of(model, a)? else {
        return Ok(0.0);
    };
    let n = model.truncation() as i64;
    let basis = model.basis();
    let a_star = star(model, a)?;
    let forward = mode_of_state(model, a, m)?;
    let backward = mode_of_state(model, &a_star, -m)?;
    let mut worst = Q::zero();
    for s in 0..=n {
        let t = s - m;
        if t < 0 || t > n {
            continue;
        }
        let (s, t) = (s as usize, t as usize);
        let block = forward.block(basis, s);
        let gs_inv = model.gram_block(s).inverse().ok_or(VoaError::NotPositiveDefinite { degree: s })?;
        let adjoint = gs_inv.mul(&block.transpose()).mul(model.gram_block(t));
        let expected = backward.block(basis, t);
        for i in 0..adjoint.rows() {
            for j in 0..adjoint.cols() {
                let diff = (adjoint.get(i, j) - expected.get(i, j)).abs();
                if diff > worst {
                    worst = diff;
                }
            }
        }
    }
    Ok(q_to_f64(&worst))
}

/// Exact checks of the invariant form on a built model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitarityReport {
    pub model: String,
    pub dims: Vec<usize>,
    pub hermitian: bool,
    pub positive_definite: bool,
    /// Degrees whose Verma-level form has a nontrivial radical.
    pub radical_degrees: Vec<usize>,
    #[serde(with = "serde_q")]
    pub conformal_norm: Q,
    #[serde(with = "serde_q")]
    pub half_central_charge: Q,
    /// Largest exact deviation of `(a_m)† = (a*)_{-m}` over generators and `|m| <= 3`.
    pub adjoint_residual: f64,
    pub pass: bool,
}

pub fn unitarity_report(model: &Model) -> Result<UnitarityReport> {
    let blocks = model.gram_blocks();
    let hermitian = blocks.iter().all(QMat::is_symmetric);
    let positive_definite = blocks.iter().all(|g| g.rows() == 0 || g.is_positive_definite());
    let radical_degrees =
        (0..blocks.len()).filter(|&d| model.verma().is_some_and(|v| !v.radical[d].is_empty())).collect();
    let conformal_norm = norm_squared(model, model.conformal_state());
    let half_central_charge = model.central_charge() / q_int(2);
    let mut residual = 0.0f64;
    let span = 3.min(model.truncation() as i64);
    for g in model.generators() {
        let a = StateVector::basis(g.state);
        for m in -span..=span {
            residual = residual.max(adjoint_residual(model, &a, m)?);
        }
    }
    let pass = hermitian && positive_definite && conformal_norm == half_central_charge && residual == 0.0;
    Ok(UnitarityReport {
        model: model.spec().label(),
        dims: model.basis().dims(),
        hermitian,
        positive_definite,
        radical_degrees,
        conformal_norm,
        half_central_charge,
        adjoint_residual: residual,
        pass,
    })
}

/// `[a_m, b_n] - (a_{(0)}b)_{m+n} - m (a*|b) δ_{m,-n}` for `a, b` of degree 1.
pub fn kac_moody_residual(model: &Model, a: &StateVector, b: &StateVector, m: i64, n: i64) -> Result<Residual> {
    for (name, v) in [("a", a), ("b", b)] {
        if let Some(d) = degree_of(model, v)? {
            if d != 1 {
                return Err(VoaError::Precondition(format!("{name} has degree {d}, expected 1")));
            }
        }
    }
    if model.truncation() < 2 {
        return Err(VoaError::InsufficientTruncation { required: 2, available: model.truncation() });
    }
    let bracket = state_product(model, a, 0, b)?;
    let pairing = model.inner(&star(model, a)?, b);
    let central = if m + n == 0 { q_int(m) * pairing } else { Q::zero() };
    let big_n = model.truncation() as i64;
    let basis = model.basis();
    let mut res = Residual::new("kac_moody", 1);
    for d in 0..=big_n {
        if d - n > big_n || d - m > big_n || d - m - n > big_n {
            continue;
        }
        for u in basis.range(d as usize) {
            let e = QVec::unit(u);
            let mut diff = apply_mode(model, a, m, &apply_mode(model, b, n, &e)?)?;
            diff.sub_assign(&apply_mode(model, b, n, &apply_mode(model, a, m, &e)?)?);
            diff.sub_assign(&apply_mode(model, &bracket, m + n, &e)?);
            diff.add_scaled(&e, &-central.clone());
            res.record(&diff, || format!("(m,n)=({m},{n}) on basis index {u}"));
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_fock::{build_model, ModelSpec};
    use crate::rational::q_frac;

    #[test]
    fn heisenberg_degree_two_gram() {
        let model = build_model(&ModelSpec::heisenberg(1, 2)).unwrap();
        let g = model.gram_block(2);
        assert_eq!(g.to_rows(), vec![vec![q_int(2), q_int(0)], vec![q_int(0), q_int(2)]]);
        assert_eq!(model.gram_block(0).to_rows(), vec![vec![q_int(1)]]);
    }

    #[test]
    fn conformal_vector_norm() {
        for c in [q_frac(1, 2), q_frac(7, 10), q_int(1), q_int(2)] {
            let model = build_model(&ModelSpec::virasoro(c.clone(), 4)).unwrap();
            let nu = model.conformal_state().clone();
            assert_eq!(norm_squared(&model, &nu), c / q_int(2));
            assert_eq!(star(&model, &nu).unwrap(), nu);
        }
    }

    #[test]
    fn derivative_state_has_inhomogeneous_adjoint() {
        let model = build_model(&ModelSpec::heisenberg(1, 6)).unwrap();
        let basis = model.basis();
        let idx = |modes: &[i32]| {
            let s = crate::BasisState::new(0, modes.iter().map(|&m| crate::Factor::new(0, m)).collect());
            basis.index_of(&s).unwrap()
        };
        // θ(L_{-1}α) = -L_{-1}α and e^{L_1} adds -L_1 L_{-1}α = -2α
        let a = StateVector::basis(idx(&[-2]));
        let expected = StateVector::from_terms([(idx(&[-2]), q_int(-1)), (idx(&[-1]), q_int(-2))]);
        assert_eq!(star(&model, &a).unwrap(), expected);
        for m in -3..=3 {
            assert_eq!(adjoint_residual(&model, &a, m).unwrap(), 0.0);
        }
        for i in 0..basis.len() {
            let v = StateVector::basis(i);
            assert_eq!(star(&model, &star(&model, &v).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn unitarity_reports_pass() {
        for spec in [ModelSpec::heisenberg(1, 6), ModelSpec::virasoro(q_frac(1, 2), 6), ModelSpec::lattice(2, 4)] {
            let model = build_model(&spec).unwrap();
            let r = unitarity_report(&model).unwrap();
            assert!(r.pass, "{r:?}");
        }
        // c = 1/2 has its first null vector at degree 6
        let model = build_model(&ModelSpec::virasoro(q_frac(1, 2), 6)).unwrap();
        assert_eq!(unitarity_report(&model).unwrap().radical_degrees, vec![6]);
    }

    #[test]
    fn lattice_tops_are_adjoint_pairs() {
        let model = build_model(&ModelSpec::lattice(2, 4)).unwrap();
        let plus = StateVector::basis(model.generators()[1].state);
        let minus = StateVector::basis(model.generators()[2].state);
        assert_eq!(star(&model, &plus).unwrap(), minus);
        for m in -3..=3 {
            assert_eq!(adjoint_residual(&model, &plus, m).unwrap(), 0.0);
        }
    }
}
