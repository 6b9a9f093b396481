use num::Zero;

use super::basis::GradedBasis;
use crate::error::{Result, VoaError};
use crate::linalg::QVec;
use crate::rational::{q_to_f64, Q};

/// A vector of the truncated space, stored by exact coefficients over the
/// global basis index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct StateVector {
    coeffs: QVec,
}

impl StateVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(i: usize) -> Self {
        Self { coeffs: QVec::unit(i) }
    }

    pub fn from_qvec(coeffs: QVec) -> Self {
        Self { coeffs }
    }

    pub fn from_terms<I: IntoIterator<Item = (usize, Q)>>(terms: I) -> Self {
        Self { coeffs: QVec::from_terms(terms) }
    }

    pub fn coeffs(&self) -> &QVec {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> QVec {
        self.coeffs
    }

    pub fn coefficient(&self, i: usize) -> Q {
        self.coeffs.get(i)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_zero()
    }

    /// Common degree of the support; `None` for the zero vector.
    pub fn degree(&self, basis: &GradedBasis) -> Result<Option<usize>> {
        let mut degrees = self.coeffs.indices().map(|i| basis.degree(i));
        let Some(first) = degrees.next() else {
            return Ok(None);
        };
        if degrees.all(|d| d == first) {
            Ok(Some(first))
        } else {
            Err(VoaError::NotHomogeneous)
        }
    }

    pub fn scaled(&self, c: &Q) -> Self {
        Self { coeffs: self.coeffs.scaled(c) }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut c = self.coeffs.clone();
        c.add_assign(&other.coeffs);
        Self { coeffs: c }
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut c = self.coeffs.clone();
        c.sub_assign(&other.coeffs);
        Self { coeffs: c }
    }

    pub fn to_f64(&self) -> Vec<(usize, f64)> {
        self.coeffs.iter().map(|(i, x)| (i, q_to_f64(x))).collect()
    }

    pub fn max_abs(&self) -> Q {
        if self.is_zero() {
            Q::zero()
        } else {
            self.coeffs.max_abs()
        }
    }
}

impl From<QVec> for StateVector {
    fn from(coeffs: QVec) -> Self {
        Self { coeffs }
    }
}
