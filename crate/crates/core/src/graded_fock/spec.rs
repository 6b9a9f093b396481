use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VoaError};
use crate::linalg::QMat;
use crate::rational::{format_q, q_int, serde_q, serde_q_matrix, Q};

/// Which vertex operator algebra to realize.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Rank-r free bosons with the given Gram matrix of the currents.
    Heisenberg {
        #[serde(with = "serde_q_matrix")]
        metric: Vec<Vec<Q>>,
    },
    /// Simple quotient of the vacuum Virasoro module at central charge `c`.
    Virasoro {
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// Rank-one even lattice `Zγ` with `⟨γ,γ⟩ = q`.
    Lattice { q: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    /// Maximal conformal degree kept.
    pub truncation: usize,
}

impl ModelSpec {
    pub fn heisenberg(rank: usize, truncation: usize) -> Self {
        let metric = (0..rank).map(|i| (0..rank).map(|j| q_int(i64::from(i == j))).collect()).collect();
        Self { kind: ModelKind::Heisenberg { metric }, truncation }
    }

    pub fn heisenberg_with_metric(metric: Vec<Vec<Q>>, truncation: usize) -> Self {
        Self { kind: ModelKind::Heisenberg { metric }, truncation }
    }

    pub fn virasoro(c: Q, truncation: usize) -> Self {
        Self { kind: ModelKind::Virasoro { c }, truncation }
    }

    pub fn lattice(q: u32, truncation: usize) -> Self {
        Self { kind: ModelKind::Lattice { q }, truncation }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ModelKind::Heisenberg { metric } => {
                if metric.is_empty() {
                    return Err(VoaError::InvalidSpec("Heisenberg rank must be positive".into()));
                }
                if metric.iter().any(|r| r.len() != metric.len()) {
                    return Err(VoaError::InvalidSpec("metric must be square".into()));
                }
                let m = QMat::from_rows(metric.clone());
                if !m.is_symmetric() {
                    return Err(VoaError::InvalidSpec("metric must be symmetric".into()));
                }
                if !m.is_positive_definite() {
                    return Err(VoaError::InvalidSpec("metric must be positive definite".into()));
                }
            }
            ModelKind::Virasoro { .. } => {}
            ModelKind::Lattice { q } => {
                if *q < 2 || q % 2 != 0 {
                    return Err(VoaError::InvalidSpec(format!("lattice norm q = {q} must be even and at least 2")));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        match &self.kind {
            ModelKind::Heisenberg { metric } => metric.len(),
            ModelKind::Virasoro { .. } | ModelKind::Lattice { .. } => 1,
        }
    }

    /// Conformal degree of the lowest state in charge sector `k`.
    pub fn sector_ground_degree(&self, k: i64) -> Option<usize> {
        match &self.kind {
            ModelKind::Lattice { q } => Some((k * k) as usize * (*q as usize) / 2),
            _ => (k == 0).then_some(0),
        }
    }

    /// Charge sectors with ground degree inside the truncation.
    pub fn sectors(&self) -> Vec<i64> {
        match &self.kind {
            ModelKind::Lattice { q } => {
                let q = *q as i64;
                let n = self.truncation as i64;
                let kmax = (0..).take_while(|k| k * k * q / 2 <= n).last().unwrap_or(0);
                (-kmax..=kmax).collect()
            }
            _ => vec![0],
        }
    }

    pub fn label(&self) -> String {
        let body = match &self.kind {
            ModelKind::Heisenberg { metric } => {
                let identity = metric
                    .iter()
                    .enumerate()
                    .all(|(i, r)| r.iter().enumerate().all(|(j, x)| *x == q_int(i64::from(i == j))));
                if identity {
                    format!("heisenberg(rank={})", metric.len())
                } else {
                    let entries: Vec<String> =
                        metric.iter().map(|r| r.iter().map(format_q).collect::<Vec<_>>().join(" ")).collect();
                    format!("heisenberg(metric=[{}])", entries.join("; "))
                }
            }
            ModelKind::Virasoro { c } => format!("virasoro(c={})", short_q(c)),
            ModelKind::Lattice { q } => format!("lattice(q={q})"),
        };
        format!("{body}/N={}", self.truncation)
    }

    /// Content address of the spec (hex SHA-256 of its canonical JSON).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub(crate) fn short_q(x: &Q) -> String {
    if x.denom() == &num::BigInt::from(1) {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q_frac;

    #[test]
    fn rejects_bad_specs() {
        assert!(ModelSpec::lattice(3, 4).validate().is_err());
        assert!(ModelSpec::lattice(0, 4).validate().is_err());
        assert!(ModelSpec::lattice(2, 4).validate().is_ok());
        let not_pd = vec![vec![q_int(1), q_int(2)], vec![q_int(2), q_int(1)]];
        assert!(ModelSpec::heisenberg_with_metric(not_pd, 3).validate().is_err());
        let asym = vec![vec![q_int(2), q_int(1)], vec![q_int(0), q_int(2)]];
        assert!(ModelSpec::heisenberg_with_metric(asym, 3).validate().is_err());
    }

    #[test]
    fn sectors_follow_ground_degree() {
        assert_eq!(ModelSpec::lattice(2, 1).sectors(), vec![-1, 0, 1]);
        assert_eq!(ModelSpec::lattice(2, 4).sectors(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(ModelSpec::lattice(4, 1).sectors(), vec![0]);
        assert_eq!(ModelSpec::lattice(4, 8).sector_ground_degree(2), Some(8));
    }

    #[test]
    fn json_round_trip_and_hash() {
        let spec = ModelSpec::virasoro(q_frac(7, 10), 6);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"virasoro","c":"7/10","truncation":6}"#);
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.content_hash(), spec.content_hash());
        assert_ne!(ModelSpec::virasoro(q_frac(1, 2), 6).content_hash(), spec.content_hash());
    }
}
