//! Exact sparse vectors and small dense rational matrices.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::rational::Q;

/// Sparse vector over global basis indices. Zero coefficients are never
/// stored, so structural equality is mathematical equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct QVec(BTreeMap<usize, Q>);

impl QVec {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    pub fn unit(i: usize) -> Self {
        let mut v = Self::new();
        v.0.insert(i, Q::one());
        v
    }

    pub fn from_terms<I: IntoIterator<Item = (usize, Q)>>(terms: I) -> Self {
        let mut v = Self::new();
        for (i, c) in terms {
            v.add_term(i, &c);
        }
        v
    }

    pub fn get(&self, i: usize) -> Q {
        self.0.get(&i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, i: usize, c: &Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.0.entry(i).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.0.remove(&i);
        }
    }

    pub fn add_scaled(&mut self, other: &QVec, c: &Q) {
        if c.is_zero() {
            return;
        }
        for (i, x) in &other.0 {
            self.add_term(*i, &(x * c));
        }
    }

    pub fn add_assign(&mut self, other: &QVec) {
        for (i, x) in &other.0 {
            self.add_term(*i, x);
        }
    }

    pub fn sub_assign(&mut self, other: &QVec) {
        for (i, x) in &other.0 {
            self.add_term(*i, &-x);
        }
    }

    pub fn scaled(&self, c: &Q) -> QVec {
        if c.is_zero() {
            return QVec::new();
        }
        QVec(self.0.iter().map(|(i, x)| (*i, x * c)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Q)> + '_ {
        self.0.iter().map(|(i, x)| (*i, x))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    pub fn max_abs(&self) -> Q {
        self.0.values().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
    }

    /// Keeps only the coefficients whose index satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(usize) -> bool) -> QVec {
        QVec(self.0.iter().filter(|(i, _)| keep(**i)).map(|(i, x)| (*i, x.clone())).collect())
    }
}

/// Dense rational matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMat {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data: Vec<Q> = rows.into_iter().flatten().collect();
        assert_eq!(data.len(), r * c, "ragged rows");
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: Q) {
        self.data[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Q>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> QMat {
        let mut t = QMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &QMat) -> QMat {
        assert_eq!(self.cols, other.rows);
        let mut out = QMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let cur = out.get(i, j) + a * b;
                        out.set(i, j, cur);
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Q::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn trace(&self) -> Q {
        (0..self.rows.min(self.cols)).fold(Q::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> QMat {
        let mut m = QMat::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m.set(a, b, self.get(i, j).clone());
            }
        }
        m
    }

    /// Solves `self * X = rhs` for square nonsingular `self`. Returns `None`
    /// when singular.
    pub fn solve(&self, rhs: &QMat) -> Option<QMat> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let m = rhs.cols;
        let mut a: Vec<Vec<Q>> = (0..n)
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r.extend_from_slice(rhs.row(i));
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, pivot);
            let inv = a[col][col].recip();
            for x in a[col].iter_mut() {
                if !x.is_zero() {
                    *x *= &inv;
                }
            }
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r == col || row[col].is_zero() {
                    continue;
                }
                let f = row[col].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    if !p.is_zero() {
                        *x -= &f * p;
                    }
                }
            }
        }
        let mut out = QMat::zeros(n, m);
        for (i, row) in a.into_iter().enumerate() {
            for (j, x) in row.into_iter().skip(n).enumerate() {
                out.set(i, j, x);
            }
        }
        Some(out)
    }

    pub fn inverse(&self) -> Option<QMat> {
        self.solve(&QMat::identity(self.rows))
    }

    /// Indices of a maximal set of linearly independent columns, chosen
    /// greedily left to right.
    pub fn pivot_columns(&self) -> Vec<usize> {
        let mut basis: Vec<(usize, Vec<Q>)> = Vec::new(); // (pivot row, reduced column)
        let mut chosen = Vec::new();
        for j in 0..self.cols {
            let mut v: Vec<Q> = (0..self.rows).map(|i| self.get(i, j).clone()).collect();
            for (p, b) in &basis {
                if v[*p].is_zero() {
                    continue;
                }
                let f = v[*p].clone() / &b[*p];
                for (x, y) in v.iter_mut().zip(b) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
            if let Some(p) = v.iter().position(|x| !x.is_zero()) {
                basis.push((p, v));
                chosen.push(j);
            }
        }
        chosen
    }

    /// Basis of the right null space.
    pub fn kernel(&self) -> Vec<Vec<Q>> {
        let (rref, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|j| !pivots.contains(j)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (r, &p) in pivots.iter().enumerate() {
                    v[p] = -rref.get(r, f).clone();
                }
                v
            })
            .collect()
    }

    fn rref(&self) -> (QMat, Vec<usize>) {
        let mut a = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            let Some(p) = (r..a.rows).find(|&i| !a.get(i, c).is_zero()) else {
                continue;
            };
            for j in 0..a.cols {
                let tmp = a.get(p, j).clone();
                let other = a.get(r, j).clone();
                a.set(r, j, tmp);
                a.set(p, j, other);
            }
            let inv = a.get(r, c).recip();
            for j in 0..a.cols {
                let x = a.get(r, j) * &inv;
                a.set(r, j, x);
            }
            for i in 0..a.rows {
                if i != r && !a.get(i, c).is_zero() {
                    let f = a.get(i, c).clone();
                    for j in 0..a.cols {
                        let x = a.get(i, j) - &f * a.get(r, j);
                        a.set(i, j, x);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (a, pivots)
    }

    /// Exact positive-definiteness test via symmetric Gaussian elimination
    /// (all pivots of the LDLᵀ factorization strictly positive).
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_symmetric() {
            return false;
        }
        let n = self.rows;
        let mut a: Vec<Vec<Q>> = (0..n).map(|i| self.row(i).to_vec()).collect();
        for k in 0..n {
            if !a[k][k].is_positive() {
                return false;
            }
            let pivot = a[k][k].clone();
            let pivot_row = a[k].clone();
            for row in a.iter_mut().skip(k + 1) {
                if row[k].is_zero() {
                    continue;
                }
                let f = row[k].clone() / &pivot;
                for (x, p) in row.iter_mut().zip(&pivot_row).skip(k) {
                    if !p.is_zero() {
                        *x -= &f * p;
                    }
                }
            }
        }
        true
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| crate::rational::q_to_f64(self.get(i, j)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q_frac, q_int};

    #[test]
    fn qvec_cancels_to_zero() {
        let mut v = QVec::unit(3);
        v.add_term(3, &q_int(-1));
        assert!(v.is_zero());
        v.add_term(1, &q_frac(1, 2));
        assert_eq!(v.get(1), q_frac(1, 2));
        assert_eq!(v.get(7), q_int(0));
    }

    #[test]
    fn solve_and_inverse() {
        let m = QMat::from_rows(vec![vec![q_int(2), q_int(1)], vec![q_int(1), q_int(3)]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), QMat::identity(2));
        let singular = QMat::from_rows(vec![vec![q_int(1), q_int(2)], vec![q_int(2), q_int(4)]]);
        assert!(singular.inverse().is_none());
        assert_eq!(singular.pivot_columns(), vec![0]);
        let k = singular.kernel();
        assert_eq!(k, vec![vec![q_int(-2), q_int(1)]]);
    }

    #[test]
    fn positive_definiteness() {
        let pd = QMat::from_rows(vec![vec![q_int(2), q_int(1)], vec![q_int(1), q_int(2)]]);
        assert!(pd.is_positive_definite());
        let indefinite = QMat::from_rows(vec![vec![q_int(1), q_int(2)], vec![q_int(2), q_int(1)]]);
        assert!(!indefinite.is_positive_definite());
    }
}
