//! Model containers (`voa-model/1`) and a content-addressed on-disk cache.
//!
//! A container holds the clean model: basis, Gram blocks, eagerly built
//! generator matrices and the Verma quotient data. Mutations are never
//! stored; they are re-applied after loading.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::basis::{BasisState, GradedBasis};
use super::model::{build_model, Generator, Model, Mutation};
use super::spec::ModelSpec;
use super::state::StateVector;
use super::virasoro::{VermaQuotient, Word};
use crate::error::{Result, VoaError};
use crate::linalg::{QMat, QVec};
use crate::mode_engine::ModeMatrix;
use crate::rational::{format_q, parse_q, Q};

pub const MODEL_SCHEMA: &str = "voa-model/1";

type Sparse = Vec<(usize, String)>;

fn sparse(v: &QVec) -> Sparse {
    v.iter().map(|(i, c)| (i, format_q(c))).collect()
}

fn unsparse(s: &Sparse) -> Result<QVec> {
    s.iter().map(|(i, c)| Ok((*i, parse_q(c)?))).collect::<Result<Vec<_>>>().map(QVec::from_terms)
}

fn dense(m: &QMat) -> Vec<Vec<String>> {
    m.to_rows().iter().map(|r| r.iter().map(format_q).collect()).collect()
}

fn undense(rows: &[Vec<String>]) -> Result<QMat> {
    let rows: Vec<Vec<Q>> =
        rows.iter().map(|r| r.iter().map(|x| parse_q(x)).collect::<Result<_>>()).collect::<Result<_>>()?;
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(VoaError::Format("Gram block is not square".into()));
    }
    Ok(QMat::from_rows(rows))
}

#[derive(Serialize, Deserialize)]
struct StoredMode {
    generator: usize,
    mode: i64,
    owner_degree: usize,
    columns: Vec<(usize, Sparse)>,
}

#[derive(Serialize, Deserialize)]
struct StoredVerma {
    words: Vec<Vec<Word>>,
    gram: Vec<Vec<Vec<String>>>,
    pivots: Vec<Vec<usize>>,
    reduction: Vec<Vec<Vec<(usize, String)>>>,
    radical: Vec<Vec<Vec<String>>>,
}

#[derive(Serialize, Deserialize)]
pub struct ModelContainer {
    schema: String,
    spec_hash: String,
    spec: ModelSpec,
    levels: Vec<Vec<BasisState>>,
    gram: Vec<Vec<Vec<String>>>,
    generators: Vec<Generator>,
    conformal: Sparse,
    central_charge: String,
    modes: Vec<StoredMode>,
    verma: Option<StoredVerma>,
}

impl ModelContainer {
    /// Snapshot of a clean model. Fails for mutated models, whose corrupted
    /// matrices must never be cached under the clean spec hash.
    pub fn from_model(model: &Model) -> Result<Self> {
        if !model.mutations.is_empty() {
            return Err(VoaError::Precondition("mutated models are not stored".into()));
        }
        let basis = &model.basis;
        let levels = (0..=basis.truncation()).map(|d| basis.level(d).to_vec()).collect();
        let eager = model.gen_modes.read().expect("lock");
        let mut keys: Vec<_> = eager.keys().copied().collect();
        keys.sort_unstable();
        let modes = keys
            .into_iter()
            .filter(|&(g, _)| !matches!(model.generators[g].kind, super::GeneratorKind::Exponential { .. }))
            .map(|(g, m)| {
                let mat = &eager[&(g, m)];
                StoredMode {
                    generator: g,
                    mode: m,
                    owner_degree: mat.owner_degree(),
                    columns: mat.columns().map(|(u, v)| (u, sparse(v))).collect(),
                }
            })
            .collect();
        let verma = model.verma.as_ref().map(|v| StoredVerma {
            words: v.words.clone(),
            gram: v.gram.iter().map(dense).collect(),
            pivots: v.pivots.clone(),
            reduction: v
                .reduction
                .iter()
                .map(|level| level.iter().map(|row| row.iter().map(|(i, c)| (*i, format_q(c))).collect()).collect())
                .collect(),
            radical: v
                .radical
                .iter()
                .map(|level| level.iter().map(|row| row.iter().map(format_q).collect()).collect())
                .collect(),
        });
        Ok(Self {
            schema: MODEL_SCHEMA.into(),
            spec_hash: model.spec.content_hash(),
            spec: model.spec.clone(),
            levels,
            gram: model.gram.iter().map(dense).collect(),
            generators: model.generators.clone(),
            conformal: sparse(model.conformal.coeffs()),
            central_charge: format_q(&model.central_charge),
            modes,
            verma,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn into_model(self) -> Result<Model> {
        if self.schema != MODEL_SCHEMA {
            return Err(VoaError::Format(format!("unknown schema {}", self.schema)));
        }
        if self.spec_hash != self.spec.content_hash() {
            return Err(VoaError::Format("container hash does not match its spec".into()));
        }
        if self.levels.len() != self.spec.truncation + 1 || self.gram.len() != self.levels.len() {
            return Err(VoaError::Format("container truncation does not match its spec".into()));
        }
        let basis = GradedBasis::from_levels(self.levels);
        let gram: Vec<QMat> = self.gram.iter().map(|g| undense(g)).collect::<Result<_>>()?;
        for (d, g) in gram.iter().enumerate() {
            if g.rows() != basis.dim(d) {
                return Err(VoaError::Format(format!("Gram block {d} has the wrong size")));
            }
        }
        let mut gen_modes = HashMap::new();
        for m in self.modes {
            let columns = m.columns.iter().map(|(u, v)| Ok((*u, unsparse(v)?))).collect::<Result<_>>()?;
            let mat = ModeMatrix::from_map(&basis, m.owner_degree, m.mode, columns);
            gen_modes.insert((m.generator, m.mode), Arc::new(mat));
        }
        let verma = match self.verma {
            None => None,
            Some(v) => {
                let parse_rows = |rows: &Vec<Vec<String>>| -> Result<Vec<Vec<Q>>> {
                    rows.iter().map(|r| r.iter().map(|x| parse_q(x)).collect()).collect()
                };
                Some(VermaQuotient {
                    word_index: v
                        .words
                        .iter()
                        .flat_map(|level| level.iter().enumerate().map(|(i, w)| (w.clone(), i)))
                        .collect(),
                    words: v.words,
                    gram: v.gram.iter().map(|g| undense(g)).collect::<Result<_>>()?,
                    pivots: v.pivots,
                    reduction: v
                        .reduction
                        .iter()
                        .map(|level| {
                            level.iter().map(|row| row.iter().map(|(i, c)| Ok((*i, parse_q(c)?))).collect()).collect()
                        })
                        .collect::<Result<_>>()?,
                    radical: v.radical.iter().map(parse_rows).collect::<Result<_>>()?,
                })
            }
        };
        let generator_of_state = self.generators.iter().enumerate().map(|(g, x)| (x.state, g)).collect();
        Ok(Model {
            spec: self.spec,
            basis,
            gram,
            generators: self.generators,
            generator_of_state,
            conformal: StateVector::from_qvec(unsparse(&self.conformal)?),
            central_charge: parse_q(&self.central_charge)?,
            verma,
            mutations: Vec::new(),
            gen_modes: RwLock::new(gen_modes),
            columns: RwLock::new(HashMap::new()),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let json = ModelContainer::from_model(model)?.to_json()?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, json)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    ModelContainer::from_json(&std::fs::read_to_string(path)?)?.into_model()
}

/// Directory of containers named by spec hash.
#[derive(Clone, Debug)]
pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, spec: &ModelSpec) -> PathBuf {
        self.dir.join(format!("{}.json", spec.content_hash()))
    }

    /// Loads the clean model from the cache or builds and stores it, then
    /// applies `mutations`. Returns whether the cache was hit. A damaged or
    /// mismatching entry is rebuilt and overwritten.
    pub fn load_or_build(&self, spec: &ModelSpec, mutations: &[Mutation]) -> Result<(Model, bool)> {
        spec.validate()?;
        let path = self.path_for(spec);
        if path.exists() {
            if let Ok(model) = load_model(&path) {
                if model.spec() == spec {
                    return Ok((model.mutated(mutations)?, true));
                }
            }
        }
        let model = build_model(spec)?;
        std::fs::create_dir_all(&self.dir)?;
        save_model(&model, &path)?;
        Ok((model.mutated(mutations)?, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_engine::mode_of_state;
    use crate::rational::q_frac;

    fn same(a: &Model, b: &Model) {
        assert_eq!(a.basis().states(), b.basis().states());
        assert_eq!(a.gram_blocks(), b.gram_blocks());
        assert_eq!(a.conformal_state(), b.conformal_state());
        for g in 0..a.generators().len() {
            let s = StateVector::basis(a.generators()[g].state);
            for m in -3..=3 {
                assert_eq!(mode_of_state(a, &s, m).unwrap(), mode_of_state(b, &s, m).unwrap());
            }
        }
        let nu = a.conformal_state();
        assert_eq!(mode_of_state(a, nu, 1).unwrap(), mode_of_state(b, nu, 1).unwrap());
    }

    #[test]
    fn containers_round_trip() {
        for spec in [ModelSpec::heisenberg(2, 4), ModelSpec::virasoro(q_frac(1, 2), 8), ModelSpec::lattice(2, 6)] {
            let model = build_model(&spec).unwrap();
            let json = ModelContainer::from_model(&model).unwrap().to_json().unwrap();
            let back = ModelContainer::from_json(&json).unwrap().into_model().unwrap();
            same(&model, &back);
            assert_eq!(ModelContainer::from_model(&back).unwrap().to_json().unwrap(), json);
        }
    }

    #[test]
    fn cache_hit_matches_cold_build() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ModelCache::new(dir.path());
        let spec = ModelSpec::virasoro(q_frac(7, 10), 8);
        let (cold, hit) = cache.load_or_build(&spec, &[]).unwrap();
        assert!(!hit);
        let (warm, hit) = cache.load_or_build(&spec, &[]).unwrap();
        assert!(hit);
        same(&cold, &warm);
        std::fs::write(cache.path_for(&spec), "{").unwrap();
        let (_, hit) = cache.load_or_build(&spec, &[]).unwrap();
        assert!(!hit);
    }

    #[test]
    fn mutated_models_are_not_stored() {
        let spec = ModelSpec::heisenberg(1, 3);
        let mu = Mutation { generator: 0, mode: 1, source: 1, target: 0, delta: q_frac(1, 1) };
        let model = super::super::build_model_with(&spec, &[mu]).unwrap();
        assert!(ModelContainer::from_model(&model).is_err());
    }
}
