use std::cmp::Reverse;
use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::spec::{ModelKind, ModelSpec};
use crate::error::Result;

/// One creation mode `g_{mode}` (plain convention, `mode < 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub gen: u16,
    pub mode: i32,
}

impl Factor {
    pub fn new(gen: u16, mode: i32) -> Self {
        Self { gen, mode }
    }

    pub fn weight(&self) -> usize {
        (-self.mode) as usize
    }
}

/// Canonical label of a PBW-type basis vector: creation modes applied left
/// to right to the top vector of charge sector `sector`.
///
/// Factors are kept sorted by generator id ascending, then mode index
/// descending, which makes the label unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    pub sector: i64,
    pub factors: Vec<Factor>,
}

impl BasisState {
    pub fn vacuum() -> Self {
        Self { sector: 0, factors: Vec::new() }
    }

    pub fn top(sector: i64) -> Self {
        Self { sector, factors: Vec::new() }
    }

    pub fn new(sector: i64, mut factors: Vec<Factor>) -> Self {
        sort_canonical(&mut factors);
        Self { sector, factors }
    }

    /// Degree contributed by the creation modes (excludes the sector ground
    /// degree).
    pub fn mode_weight(&self) -> usize {
        self.factors.iter().map(Factor::weight).sum()
    }

    pub fn is_top(&self) -> bool {
        self.factors.is_empty()
    }

    /// Removes the leftmost factor.
    pub fn peel(&self) -> Option<(Factor, BasisState)> {
        let (first, rest) = self.factors.split_first()?;
        Some((*first, BasisState { sector: self.sector, factors: rest.to_vec() }))
    }

    /// Inserts a creation factor for modes that commute with each other.
    pub fn with_factor(&self, f: Factor) -> BasisState {
        let mut factors = self.factors.clone();
        let key = canonical_key(&f);
        let pos = factors.partition_point(|g| canonical_key(g) <= key);
        factors.insert(pos, f);
        BasisState { sector: self.sector, factors }
    }

    pub fn count(&self, f: Factor) -> usize {
        self.factors.iter().filter(|g| **g == f).count()
    }

    /// Removes one copy of `f`, if present.
    pub fn without_factor(&self, f: Factor) -> Option<BasisState> {
        let pos = self.factors.iter().position(|g| *g == f)?;
        let mut factors = self.factors.clone();
        factors.remove(pos);
        Some(BasisState { sector: self.sector, factors })
    }
}

fn canonical_key(f: &Factor) -> (u16, Reverse<i32>) {
    (f.gen, Reverse(f.mode))
}

pub(crate) fn sort_canonical(factors: &mut [Factor]) {
    factors.sort_by_key(canonical_key);
}

/// Canonical basis grouped by degree `0..=N`, with a global index.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    states: Vec<BasisState>,
    degrees: Vec<usize>,
    offsets: Vec<usize>,
    index: HashMap<BasisState, usize>,
}

impl GradedBasis {
    pub fn from_levels(levels: Vec<Vec<BasisState>>) -> Self {
        let mut states = Vec::new();
        let mut degrees = Vec::new();
        let mut offsets = vec![0];
        for (d, level) in levels.into_iter().enumerate() {
            for s in level {
                states.push(s);
                degrees.push(d);
            }
            offsets.push(states.len());
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { states, degrees, offsets, index }
    }

    pub fn truncation(&self) -> usize {
        self.offsets.len() - 2
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self, degree: usize) -> usize {
        self.range(degree).len()
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..=self.truncation()).map(|d| self.dim(d)).collect()
    }

    /// Global indices of degree `degree` (empty past the truncation).
    pub fn range(&self, degree: usize) -> Range<usize> {
        if degree > self.truncation() {
            let end = self.states.len();
            return end..end;
        }
        self.offsets[degree]..self.offsets[degree + 1]
    }

    pub fn state(&self, i: usize) -> &BasisState {
        &self.states[i]
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn level(&self, degree: usize) -> &[BasisState] {
        &self.states[self.range(degree)]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Position of global index `i` inside its degree block.
    pub fn local(&self, i: usize) -> usize {
        i - self.offsets[self.degrees[i]]
    }
}

/// Partitions of `n` into parts `>= min_part`, each listed in ascending order.
pub fn partitions(n: usize, min_part: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, min: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(prefix.clone());
            return;
        }
        for p in min..=n {
            if n - p != 0 && n - p < p {
                continue;
            }
            prefix.push(p);
            rec(n - p, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, min_part.max(1), &mut Vec::new(), &mut out);
    out
}

/// Multisets of colored parts `(color, part)` with total weight `n`; factors
/// come out in canonical order.
fn colored_partitions(n: usize, colors: usize) -> Vec<Vec<Factor>> {
    fn rec(n: usize, types: &[(u16, usize)], start: usize, prefix: &mut Vec<Factor>, out: &mut Vec<Vec<Factor>>) {
        if n == 0 {
            out.push(prefix.clone());
            return;
        }
        for (t, &(g, p)) in types.iter().enumerate().skip(start) {
            if p > n {
                continue;
            }
            prefix.push(Factor::new(g, -(p as i32)));
            rec(n - p, types, t, prefix, out);
            prefix.pop();
        }
    }
    let types: Vec<(u16, usize)> = (0..colors as u16).flat_map(|g| (1..=n).map(move |p| (g, p))).collect();
    let mut out = Vec::new();
    rec(n, &types, 0, &mut Vec::new(), &mut out);
    out
}

fn word_state(sector: i64, parts: &[usize]) -> BasisState {
    BasisState::new(sector, parts.iter().map(|&p| Factor::new(0, -(p as i32))).collect())
}

/// All canonical basis labels of degree `<= N`.
///
/// For the Virasoro kind this is the basis of the vacuum module generated by
/// `L_{-n}, n >= 2` before the Gram radical is divided out; the quotient
/// basis is chosen when the model is built.
pub fn enumerate_basis(spec: &ModelSpec) -> Result<GradedBasis> {
    spec.validate()?;
    let n = spec.truncation;
    let levels = (0..=n)
        .map(|d| match &spec.kind {
            ModelKind::Heisenberg { metric } => {
                colored_partitions(d, metric.len()).into_iter().map(|f| BasisState { sector: 0, factors: f }).collect()
            }
            ModelKind::Virasoro { .. } => partitions(d, 2).iter().map(|p| word_state(0, p)).collect(),
            ModelKind::Lattice { .. } => spec
                .sectors()
                .into_iter()
                .filter_map(|k| {
                    let ground = spec.sector_ground_degree(k)?;
                    (ground <= d).then(|| partitions(d - ground, 1).into_iter().map(move |p| word_state(k, &p)))
                })
                .flatten()
                .collect(),
        })
        .collect();
    Ok(GradedBasis::from_levels(levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_small() {
        assert_eq!(partitions(4, 1), vec![vec![1, 1, 1, 1], vec![1, 1, 2], vec![1, 3], vec![2, 2], vec![4]]);
        assert_eq!(partitions(5, 2), vec![vec![2, 3], vec![5]]);
        assert_eq!(partitions(0, 2), vec![Vec::<usize>::new()]);
        assert!(partitions(1, 2).is_empty());
    }

    #[test]
    fn canonical_factor_order() {
        let s = BasisState::new(0, vec![Factor::new(1, -1), Factor::new(0, -3), Factor::new(0, -1)]);
        assert_eq!(s.factors, vec![Factor::new(0, -1), Factor::new(0, -3), Factor::new(1, -1)]);
        let t = s.with_factor(Factor::new(0, -2));
        assert_eq!(t.factors[1], Factor::new(0, -2));
        assert_eq!(t.without_factor(Factor::new(0, -2)).unwrap(), s);
    }

    #[test]
    fn vacuum_only_at_zero_truncation() {
        let b = enumerate_basis(&ModelSpec::heisenberg(1, 0)).unwrap();
        assert_eq!(b.dims(), vec![1]);
        assert_eq!(b.state(0), &BasisState::vacuum());
    }

    #[test]
    fn colored_counts() {
        // rank 2: coefficients of prod (1-q^n)^{-2}: 1, 2, 5, 10, 20
        let b = enumerate_basis(&ModelSpec::heisenberg(2, 4)).unwrap();
        assert_eq!(b.dims(), vec![1, 2, 5, 10, 20]);
        for s in b.states() {
            let mut sorted = s.factors.clone();
            sort_canonical(&mut sorted);
            assert_eq!(sorted, s.factors);
        }
    }

    #[test]
    fn lattice_degree_one() {
        let b = enumerate_basis(&ModelSpec::lattice(2, 1)).unwrap();
        assert_eq!(b.dims(), vec![1, 3]);
        let sectors: Vec<i64> = b.level(1).iter().map(|s| s.sector).collect();
        assert_eq!(sectors, vec![-1, 0, 1]);
    }
}
