//! Graded operator norms `‖a_m‖_n`, damped norms and C*-identity checks.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VoaError};
use crate::graded_fock::{Model, StateVector};
use crate::mode_engine::{mode_of_state_upto, ModeMatrix};
use crate::unitary::{gram_family, star, GramFamily};

/// Relative tolerance for floating norm equalities.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// A model together with its Gram factorizations, shared by all norm
/// evaluations.
pub struct NormLab<'m> {
    model: &'m Model,
    gram: GramFamily,
}

impl<'m> NormLab<'m> {
    pub fn new(model: &'m Model) -> Result<Self> {
        Ok(Self { model, gram: gram_family(model)? })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn gram(&self) -> &GramFamily {
        &self.gram
    }

    fn truncation(&self) -> i64 {
        self.model.truncation() as i64
    }

    fn check_window(&self, m: i64, n: i64) -> Result<()> {
        let big_n = self.truncation();
        if n > big_n || n - m > big_n {
            return Err(VoaError::InsufficientTruncation {
                required: n.max(n - m) as usize,
                available: big_n as usize,
            });
        }
        Ok(())
    }

    /// Orthonormalized block of `op` on source degree `d`.
    pub fn block(&self, op: &ModeMatrix, d: usize) -> Option<DMatrix<f64>> {
        let t = d as i64 - op.plain_index();
        if t < 0 || t > self.truncation() {
            return None;
        }
        let raw = op.block_f64(self.model.basis(), d);
        Some(self.gram.orthonormal(&raw, d, t as usize))
    }

    /// `‖A_d‖` for every source degree `d <= max_source`; 0 where the target
    /// leaves the truncation from below.
    pub fn block_norms(&self, op: &ModeMatrix, max_source: usize) -> Vec<f64> {
        (0..=max_source).map(|d| self.block(op, d).map_or(0.0, |b| spectral_norm(&b))).collect()
    }

    /// `a_m` restricted to sources of degree `<= n`.
    pub fn mode(&self, a: &StateVector, m: i64, n: i64) -> Result<ModeMatrix> {
        mode_of_state_upto(self.model, a, m, n.max(0) as usize)
    }

    pub fn graded_norm(&self, a: &StateVector, m: i64, n: i64) -> Result<f64> {
        if n < 0 {
            return Ok(0.0);
        }
        self.check_window(m, n)?;
        let op = self.mode(a, m, n)?;
        Ok(self.block_norms(&op, n as usize).into_iter().fold(0.0, f64::max))
    }

    /// `(‖a*_{-m} a_m‖_n, ‖a_m‖_n²)`.
    pub fn cstar_sides(&self, a: &StateVector, m: i64, n: i64) -> Result<(f64, f64)> {
        if n < 0 {
            return Ok((0.0, 0.0));
        }
        self.check_window(m, n)?;
        let a_star = star(self.model, a)?;
        let op = self.mode(a, m, n)?;
        let low = (n - m).clamp(0, self.truncation());
        let back = self.mode(&a_star, -m, low)?;
        let basis = self.model.basis();
        let mut composite: f64 = 0.0;
        let mut single: f64 = 0.0;
        for d in 0..=n as usize {
            let t = d as i64 - m;
            if t < 0 {
                continue;
            }
            let a_block = op.block_f64(basis, d);
            let b_block = back.block_f64(basis, t as usize);
            let prod = &b_block * &a_block;
            composite = composite.max(spectral_norm(&self.gram.orthonormal(&prod, d, d)));
            single = single.max(spectral_norm(&self.gram.orthonormal(&a_block, d, t as usize)));
        }
        Ok((composite, single * single))
    }

    pub fn cstar_gap(&self, a: &StateVector, m: i64, n: i64) -> Result<f64> {
        let (lhs, rhs) = self.cstar_sides(a, m, n)?;
        Ok((lhs - rhs).abs())
    }

    /// `‖a_0 q^{L_0}‖_n = max_{d <= n} q^d ‖(a_0)_d‖`.
    pub fn damped_norm(&self, a: &StateVector, q: f64, n: i64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(VoaError::Precondition(format!("damping parameter {q} is not in (0, 1)")));
        }
        if n < 0 {
            return Ok(0.0);
        }
        self.check_window(0, n)?;
        let op = self.mode(a, 0, n)?;
        Ok(self
            .block_norms(&op, n as usize)
            .into_iter()
            .enumerate()
            .map(|(d, x)| q.powi(d as i32) * x)
            .fold(0.0, f64::max))
    }

    /// `max_{d <= n} ‖(a_m)_d‖ / (1+d)^s`, the norm of `a_m (L_0+1)^{-s}`
    /// on `V_{≤n}`.
    pub fn weighted_norm(&self, a: &StateVector, m: i64, n: i64, s: f64) -> Result<f64> {
        if n < 0 {
            return Ok(0.0);
        }
        self.check_window(m, n)?;
        let op = self.mode(a, m, n)?;
        Ok(self
            .block_norms(&op, n as usize)
            .into_iter()
            .enumerate()
            .map(|(d, x)| x / (1.0 + d as f64).powf(s))
            .fold(0.0, f64::max))
    }

    /// Grid of `‖a_m‖_n`; cells outside the truncation are marked `None`.
    /// Each mode is factored once and its prefix maxima give the whole row.
    pub fn norm_table(&self, a: &StateVector, m_range: std::ops::RangeInclusive<i64>, n_max: i64) -> Result<NormTable> {
        let big_n = self.truncation();
        let ms: Vec<i64> = m_range.collect();
        let rows: Vec<Vec<NormCell>> = ms
            .par_iter()
            .map(|&m| {
                let top = n_max.min(big_n).min(big_n + m);
                let norms = if top >= 0 {
                    let op = self.mode(a, m, top)?;
                    self.block_norms(&op, top as usize)
                } else {
                    Vec::new()
                };
                let mut running: f64 = 0.0;
                let mut row = Vec::new();
                for n in 0..=n_max {
                    let norm = if n <= top {
                        running = running.max(norms[n as usize]);
                        Some(running)
                    } else {
                        None
                    };
                    row.push(NormCell { m, n, norm });
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Ok(NormTable {
            schema: NormTable::SCHEMA.into(),
            model: self.model.spec().label(),
            model_hash: self.model.spec().content_hash(),
            state: self.model.describe_vector(a),
            truncation: self.model.truncation(),
            tolerance: NORM_TOLERANCE,
            cells: rows.into_iter().flatten().collect(),
        })
    }
}

/// Largest relative gaps of the C*-identity `‖a*_{-m} a_m‖_n = ‖a_m‖_n²`
/// and the shift identity `‖a_m‖_n = ‖a*_{-m}‖_{n-m}` over a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormIdentityReport {
    pub model: String,
    pub state: String,
    pub m_max: i64,
    pub n_max: i64,
    pub cells: usize,
    pub cstar_gap: f64,
    pub shift_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn relative_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / 1f64.max(x.abs()).max(y.abs())
}

impl NormLab<'_> {
    /// Checks both identities on every `(m, n)` with `|m| <= m_max`,
    /// `n <= n_max` that fits the truncation.
    pub fn norm_identities(&self, a: &StateVector, m_max: i64, n_max: i64) -> Result<NormIdentityReport> {
        let big_n = self.truncation();
        let a_star = star(self.model, a)?;
        let ms: Vec<i64> = (-m_max..=m_max).collect();
        let gaps: Vec<(usize, f64, f64)> = ms
            .par_iter()
            .map(|&m| {
                let (mut count, mut cstar, mut shift) = (0, 0.0f64, 0.0f64);
                for n in 0..=n_max.min(big_n).min(big_n + m) {
                    let (lhs, rhs) = self.cstar_sides(a, m, n)?;
                    cstar = cstar.max(relative_gap(lhs, rhs));
                    let direct = self.graded_norm(a, m, n)?;
                    let shifted = self.graded_norm(&a_star, -m, n - m)?;
                    shift = shift.max(relative_gap(direct, shifted));
                    count += 1;
                }
                Ok((count, cstar, shift))
            })
            .collect::<Result<_>>()?;
        let cells = gaps.iter().map(|g| g.0).sum();
        let cstar_gap = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
        let shift_gap = gaps.iter().map(|g| g.2).fold(0.0, f64::max);
        Ok(NormIdentityReport {
            model: self.model.spec().label(),
            state: self.model.describe_vector(a),
            m_max,
            n_max,
            cells,
            cstar_gap,
            shift_gap,
            tolerance: NORM_TOLERANCE,
            pass: cstar_gap <= NORM_TOLERANCE && shift_gap <= NORM_TOLERANCE,
        })
    }
}

pub fn graded_norm(model: &Model, a: &StateVector, m: i64, n: i64) -> Result<f64> {
    NormLab::new(model)?.graded_norm(a, m, n)
}

pub fn cstar_gap(model: &Model, a: &StateVector, m: i64, n: i64) -> Result<f64> {
    NormLab::new(model)?.cstar_gap(a, m, n)
}

pub fn damped_norm(model: &Model, a: &StateVector, q: f64, n: i64) -> Result<f64> {
    NormLab::new(model)?.damped_norm(a, q, n)
}

pub fn norm_table(
    model: &Model,
    a: &StateVector,
    m_range: std::ops::RangeInclusive<i64>,
    n_max: i64,
) -> Result<NormTable> {
    NormLab::new(model)?.norm_table(a, m_range, n_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormCell {
    pub m: i64,
    pub n: i64,
    /// `None` when the cell needs a larger truncation.
    pub norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub schema: String,
    pub model: String,
    pub model_hash: String,
    pub state: String,
    pub truncation: usize,
    pub tolerance: f64,
    pub cells: Vec<NormCell>,
}

impl NormTable {
    pub const SCHEMA: &'static str = "voa-normtable/1";

    pub fn get(&self, m: i64, n: i64) -> Option<f64> {
        self.cells.iter().find(|c| c.m == m && c.n == n).and_then(|c| c.norm)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells with a value.
    pub fn values(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        self.cells.iter().filter_map(|c| c.norm.map(|x| (c.m, c.n, x)))
    }

    /// CSV with header `m,n,norm`; values with 17 significant digits,
    /// out-of-range cells as `insufficient`.
    pub fn to_csv(&self) -> Result<String> {
        if self.cells.is_empty() {
            return Err(VoaError::Format("empty table".into()));
        }
        let mut out = String::from("m,n,norm\n");
        for c in &self.cells {
            match c.norm {
                Some(x) => out.push_str(&format!("{},{},{:.16e}\n", c.m, c.n, x)),
                None => out.push_str(&format!("{},{},insufficient\n", c.m, c.n)),
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        if t.schema != Self::SCHEMA {
            return Err(VoaError::Format(format!("unknown schema {}", t.schema)));
        }
        Ok(t)
    }
}

/// `|x - y| <= tol · max(1, |x|, |y|)`.
pub fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * 1f64.max(x.abs()).max(y.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_fock::{build_model, ModelSpec};
    use crate::rational::{q_frac, q_to_f64};

    #[test]
    fn heisenberg_current_norms() {
        let model = build_model(&ModelSpec::heisenberg(1, 10)).unwrap();
        let lab = NormLab::new(&model).unwrap();
        let alpha = StateVector::basis(model.generators()[0].state);
        for n in 0..=9 {
            assert!(close(lab.graded_norm(&alpha, -1, n).unwrap(), ((n + 1) as f64).sqrt(), 1e-9));
        }
        for n in 0..=10 {
            assert!(close(lab.graded_norm(&alpha, 1, n).unwrap(), (n as f64).sqrt(), 1e-9));
        }
    }

    #[test]
    fn grading_operator_norm() {
        let model = build_model(&ModelSpec::virasoro(q_frac(1, 2), 6)).unwrap();
        let lab = NormLab::new(&model).unwrap();
        let nu = model.conformal_state().clone();
        // V_1 = 0 for Virasoro, so the top occupied degree below n = 1 is 0
        for n in 0..=6 {
            let top = if n == 1 { 0.0 } else { n as f64 };
            assert!(close(lab.graded_norm(&nu, 0, n).unwrap(), top, 1e-12));
        }
        let c = q_to_f64(model.central_charge());
        assert!(close(lab.graded_norm(&nu, -2, 0).unwrap(), (c / 2.0).sqrt(), 1e-12));
    }

    #[test]
    fn identities_hold_on_every_model() {
        let specs = [
            ModelSpec::heisenberg(1, 8),
            ModelSpec::virasoro(q_frac(1, 2), 8),
            ModelSpec::lattice(2, 6),
            ModelSpec::lattice(4, 6),
        ];
        for spec in specs {
            let model = build_model(&spec).unwrap();
            let lab = NormLab::new(&model).unwrap();
            for g in model.generators() {
                let r = lab.norm_identities(&StateVector::basis(g.state), 3, 6).unwrap();
                assert!(r.pass && r.cells > 0, "{r:?}");
            }
            // a descendant, whose adjoint is inhomogeneous
            let r = lab.norm_identities(&StateVector::basis(model.basis().range(3).start), 2, 4).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn csv_shape() {
        let model = build_model(&ModelSpec::heisenberg(1, 4)).unwrap();
        let lab = NormLab::new(&model).unwrap();
        let alpha = StateVector::basis(1);
        let t = lab.norm_table(&alpha, 1..=1, 4).unwrap();
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("m,n,norm\n1,0,0.0000000000000000e0\n"));
        assert!(csv.contains("1,4,2.0000000000000000e0\n"));
        #[allow(clippy::reversed_empty_ranges)]
        let empty = lab.norm_table(&alpha, 1..=0, 4).unwrap();
        assert!(empty.to_csv().is_err());
    }
}
