//! Vacuum Verma module of the Virasoro algebra on words `L_{-p1} L_{-p2} ... Ω`
//! (`2 <= p1 <= p2 <= ...`), its invariant form, and the quotient by the
//! radical of that form.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num::{One, Zero};

use super::basis::partitions;
use crate::error::{Result, VoaError};
use crate::linalg::{QMat, QVec};
use crate::rational::{q_frac, q_int, Q};

/// Parts of a Verma word in ascending order (mode index descending).
pub type Word = Vec<usize>;
pub type WordVec = BTreeMap<Word, Q>;

fn add_into(target: &mut WordVec, src: &WordVec, c: &Q) {
    if c.is_zero() {
        return;
    }
    for (w, x) in src {
        let slot = target.entry(w.clone()).or_insert_with(Q::zero);
        *slot += x * c;
        if slot.is_zero() {
            target.remove(w);
        }
    }
}

/// Straightens products `L_m · word` back into canonical words.
pub(crate) struct VermaAlgebra {
    c: Q,
    memo: HashMap<(i64, Word), Arc<WordVec>>,
}

impl VermaAlgebra {
    pub fn new(c: Q) -> Self {
        Self { c, memo: HashMap::new() }
    }

    pub fn apply(&mut self, m: i64, word: &[usize]) -> Arc<WordVec> {
        let key = (m, word.to_vec());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let out = Arc::new(self.compute(m, word));
        self.memo.insert(key, out.clone());
        out
    }

    fn compute(&mut self, m: i64, word: &[usize]) -> WordVec {
        let mut out = WordVec::new();
        let Some((&p, rest)) = word.split_first() else {
            if m <= -2 {
                out.insert(vec![(-m) as usize], Q::one());
            }
            return out;
        };
        if m <= -2 && (-m) as usize <= p {
            let mut w = Vec::with_capacity(word.len() + 1);
            w.push((-m) as usize);
            w.extend_from_slice(word);
            out.insert(w, Q::one());
            return out;
        }
        // L_m L_{-p} rest = L_{-p} L_m rest + (m+p) L_{m-p} rest + δ_{m,p} c/12 (m³-m) rest
        let p_i = p as i64;
        let inner = self.apply(m, rest);
        for (w, x) in inner.iter() {
            let lifted = self.apply(-p_i, w);
            add_into(&mut out, &lifted, x);
        }
        if m + p_i != 0 {
            let comm = self.apply(m - p_i, rest);
            add_into(&mut out, &comm, &q_int(m + p_i));
        }
        if m == p_i {
            let central = &self.c * q_frac(m * m * m - m, 12);
            let mut r = WordVec::new();
            r.insert(rest.to_vec(), Q::one());
            add_into(&mut out, &r, &central);
        }
        out
    }
}

/// The Verma data kept by a built Virasoro model: words, Gram blocks, the
/// chosen quotient basis and the reduction of every word onto it.
#[derive(Clone, Debug)]
pub struct VermaQuotient {
    pub(crate) words: Vec<Vec<Word>>,
    pub(crate) word_index: HashMap<Word, usize>,
    pub(crate) gram: Vec<QMat>,
    pub(crate) pivots: Vec<Vec<usize>>,
    /// `reduction[d][i]`: coordinates of word `i` of degree `d` in the
    /// quotient basis, as local positions within degree `d`.
    pub(crate) reduction: Vec<Vec<Vec<(usize, Q)>>>,
    pub(crate) radical: Vec<Vec<Vec<Q>>>,
}

impl VermaQuotient {
    pub(crate) fn build(c: &Q, truncation: usize) -> Result<(Self, VermaAlgebra)> {
        let mut alg = VermaAlgebra::new(c.clone());
        let words: Vec<Vec<Word>> = (0..=truncation).map(|d| partitions(d, 2)).collect();
        let word_index: HashMap<Word, usize> =
            words.iter().flat_map(|level| level.iter().enumerate().map(|(i, w)| (w.clone(), i))).collect();

        let mut gram: Vec<QMat> = Vec::with_capacity(truncation + 1);
        for (d, level) in words.iter().enumerate() {
            let n = level.len();
            let mut g = QMat::zeros(n, n);
            if d == 0 {
                g.set(0, 0, Q::one());
            } else {
                for (i, w) in level.iter().enumerate() {
                    let (&p, rest) = w.split_first().expect("positive degree word");
                    let rest_pos = word_index[rest];
                    let lower = &gram[d - p];
                    for (j, v) in level.iter().enumerate() {
                        // (L_{-p} rest | v) = (rest | L_p v)
                        let image = alg.apply(p as i64, v);
                        let mut x = Q::zero();
                        for (u, coeff) in image.iter() {
                            let pos = word_index[u];
                            let gij = lower.get(rest_pos, pos);
                            if !gij.is_zero() {
                                x += coeff * gij;
                            }
                        }
                        g.set(i, j, x);
                    }
                }
            }
            if !g.is_symmetric() {
                return Err(VoaError::NonHermitianGram { degree: d });
            }
            gram.push(g);
        }

        let mut pivots = Vec::new();
        let mut reduction = Vec::new();
        let mut radical = Vec::new();
        for g in &gram {
            let piv = g.pivot_columns();
            let all: Vec<usize> = (0..g.rows()).collect();
            let g_ii = g.submatrix(&piv, &piv);
            let g_ia = g.submatrix(&piv, &all);
            let coords = g_ii.solve(&g_ia).expect("pivot block of a Gram matrix is nonsingular");
            let red = (0..g.rows())
                .map(|j| {
                    (0..piv.len())
                        .filter(|&r| !coords.get(r, j).is_zero())
                        .map(|r| (r, coords.get(r, j).clone()))
                        .collect()
                })
                .collect();
            radical.push(g.kernel());
            pivots.push(piv);
            reduction.push(red);
        }
        Ok((Self { words, word_index, gram, pivots, reduction, radical }, alg))
    }

    pub fn quotient_words(&self, degree: usize) -> impl Iterator<Item = &Word> + '_ {
        self.pivots[degree].iter().map(move |&i| &self.words[degree][i])
    }

    pub fn verma_dim(&self, degree: usize) -> usize {
        self.words[degree].len()
    }

    pub fn quotient_dim(&self, degree: usize) -> usize {
        self.pivots[degree].len()
    }

    pub fn radical_dim(&self, degree: usize) -> usize {
        self.radical[degree].len()
    }

    /// Image of a word in the quotient, as a vector over global indices
    /// (`offset` is the global index of the first basis state of the word's degree).
    pub fn reduce(&self, word: &[usize], offset: usize) -> QVec {
        let d: usize = word.iter().sum();
        let pos = self.word_index[word];
        QVec::from_terms(self.reduction[d][pos].iter().map(|(r, x)| (offset + r, x.clone())))
    }

    pub fn quotient_gram(&self, degree: usize) -> QMat {
        let p = &self.pivots[degree];
        self.gram[degree].submatrix(p, p)
    }

    pub fn verma_gram(&self, degree: usize) -> &QMat {
        &self.gram[degree]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q_frac;

    #[test]
    fn l2_lminus2_on_vacuum() {
        let c = q_frac(1, 2);
        let mut alg = VermaAlgebra::new(c.clone());
        let out = alg.apply(2, &[2]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[&Vec::<usize>::new()], c / q_int(2));
    }

    #[test]
    fn commutes_into_canonical_order() {
        let mut alg = VermaAlgebra::new(q_int(1));
        // L_{-3} L_{-2} Ω = L_{-2} L_{-3} Ω + (-3+2) L_{-5} Ω
        let out = alg.apply(-3, &[2]);
        assert_eq!(out[&vec![2, 3]], q_int(1));
        assert_eq!(out[&vec![5]], q_int(-1));
        // L_{-1} Ω = 0 and L_{-1} L_{-2} Ω = L_{-3} Ω
        assert!(alg.apply(-1, &[]).is_empty());
        assert_eq!(alg.apply(-1, &[2])[&vec![3]], q_int(1));
    }

    #[test]
    fn ising_radical_at_degree_six() {
        let (vq, _) = VermaQuotient::build(&q_frac(1, 2), 7).unwrap();
        let radical: Vec<usize> = (0..=7).map(|d| vq.radical_dim(d)).collect();
        assert_eq!(radical, vec![0, 0, 0, 0, 0, 0, 1, 1]);
        for d in 0..=7 {
            assert!(vq.quotient_gram(d).is_positive_definite());
        }
    }
}
