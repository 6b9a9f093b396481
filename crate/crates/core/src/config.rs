//! Suite configuration (`voa-suite/1`, TOML).
//!
//! ```toml
//! schema = "voa-suite/1"
//! seed = 1
//!
//! [models.heis]
//! kind = "heisenberg"
//! rank = 1
//! truncation = 8
//!
//! [[checks]]
//! kind = "axioms"
//! model = "heis"
//! tuples = 500
//!
//! [[checks]]
//! kind = "v1_bound"
//! model = "heis"
//! state = "a0"
//! m_max = 6
//! n_max = 8
//! ```
//!
//! States are sums of terms separated by ` + `; a term is an optional
//! rational factor `p/q*` followed by a generator name, `vacuum`,
//! `conformal` or a basis index `#i`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::axioms::AxiomKind;
use crate::certify::DEFAULT_TOLERANCE;
use crate::error::{Result, VoaError};
use crate::graded_fock::{AutomorphismKind, Model, ModelSpec, Mutation, StateVector};
use crate::rational::{parse_q, q_int, Q};

pub const SUITE_SCHEMA: &str = "voa-suite/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub schema: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the certification tolerance of every bound report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Model cache directory; no caching when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 or absent means all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelEntry>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelEntry {
    Heisenberg {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank: Option<usize>,
        /// Rows of rationals as strings; overrides `rank`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric: Option<Vec<Vec<String>>>,
        truncation: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        mutations: Vec<Mutation>,
    },
    Virasoro {
        c: String,
        truncation: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        mutations: Vec<Mutation>,
    },
    Lattice {
        q: u32,
        truncation: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        mutations: Vec<Mutation>,
    },
}

impl ModelEntry {
    pub fn spec(&self) -> Result<ModelSpec> {
        let spec = match self {
            ModelEntry::Heisenberg { rank, metric, truncation, .. } => match (metric, rank) {
                (Some(rows), _) => {
                    let m = rows.iter().map(|r| r.iter().map(|x| parse_q(x)).collect()).collect::<Result<_>>()?;
                    ModelSpec::heisenberg_with_metric(m, *truncation)
                }
                (None, Some(r)) => ModelSpec::heisenberg(*r, *truncation),
                (None, None) => ModelSpec::heisenberg(1, *truncation),
            },
            ModelEntry::Virasoro { c, truncation, .. } => ModelSpec::virasoro(parse_q(c)?, *truncation),
            ModelEntry::Lattice { q, truncation, .. } => ModelSpec::lattice(*q, *truncation),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mutations(&self) -> &[Mutation] {
        match self {
            ModelEntry::Heisenberg { mutations, .. }
            | ModelEntry::Virasoro { mutations, .. }
            | ModelEntry::Lattice { mutations, .. } => mutations,
        }
    }

    pub fn mutations_mut(&mut self) -> &mut Vec<Mutation> {
        match self {
            ModelEntry::Heisenberg { mutations, .. }
            | ModelEntry::Virasoro { mutations, .. }
            | ModelEntry::Lattice { mutations, .. } => mutations,
        }
    }

    /// Generator names a model of this kind will have.
    fn generator_names(spec: &ModelSpec) -> Vec<String> {
        use crate::graded_fock::ModelKind;
        match &spec.kind {
            ModelKind::Heisenberg { metric } => (0..metric.len()).map(|i| format!("a{i}")).collect(),
            ModelKind::Virasoro { .. } => vec!["L".into()],
            ModelKind::Lattice { q } => {
                let mut names = vec!["a".to_string()];
                if (*q as usize) / 2 <= spec.truncation {
                    names.extend(["e+".to_string(), "e-".to_string()]);
                }
                names
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AutomorphismEntry {
    ChargeConjugation,
    TorusPhase { turns: String },
}

impl AutomorphismEntry {
    pub fn kind(&self) -> Result<AutomorphismKind> {
        Ok(match self {
            AutomorphismEntry::ChargeConjugation => AutomorphismKind::ChargeConjugation,
            AutomorphismEntry::TorusPhase { turns } => AutomorphismKind::TorusPhase { turns: parse_q(turns)? },
        })
    }
}

fn default_tuples() -> usize {
    500
}

fn default_true() -> bool {
    true
}

fn default_max_degree() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Axioms {
        model: String,
        #[serde(default = "default_tuples")]
        tuples: usize,
        /// Defaults to all four identities.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        identities: Vec<String>,
        #[serde(default = "default_true")]
        generator_sweep: bool,
    },
    Unitarity {
        model: String,
    },
    NormTable {
        model: String,
        state: String,
        m_max: i64,
        n_max: i64,
    },
    VirasoroBound {
        model: String,
        #[serde(default = "conformal")]
        state: String,
        m_max: i64,
        n_max: i64,
    },
    V1Bound {
        model: String,
        state: String,
        m_max: i64,
        n_max: i64,
    },
    /// Every basis state of degree `<= max_degree`.
    ProductLemma {
        model: String,
        #[serde(default = "default_max_degree")]
        max_degree: usize,
        m_max: i64,
        n_max: i64,
    },
    PrimaryBound {
        model: String,
        state: String,
        m_max: i64,
        n_max: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<f64>,
    },
    Orbifold {
        model: String,
        degree: usize,
        automorphisms: Vec<AutomorphismEntry>,
        /// Chain checks run for each `s` on the state given here.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        s_values: Vec<f64>,
        #[serde(default)]
        n_max: i64,
    },
    TraceDomination {
        model: String,
        state: String,
        q_values: Vec<String>,
        n_max: i64,
    },
    /// Either measured lattice top norms (`model`) or explicit `values`.
    Bootstrap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        #[serde(default)]
        n_max: i64,
        d_values: Vec<usize>,
        #[serde(default)]
        s_max: f64,
        /// Fixed recursion constants `(D, s)`; fitted when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        recursion: Option<(f64, f64)>,
        /// Expected verdict; the check fails when the analysis disagrees.
        expect: String,
    },
}

fn conformal() -> String {
    "conformal".into()
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Axioms { .. } => "axioms",
            CheckSpec::Unitarity { .. } => "unitarity",
            CheckSpec::NormTable { .. } => "norm_table",
            CheckSpec::VirasoroBound { .. } => "virasoro_bound",
            CheckSpec::V1Bound { .. } => "v1_bound",
            CheckSpec::ProductLemma { .. } => "product_lemma",
            CheckSpec::PrimaryBound { .. } => "primary_bound",
            CheckSpec::Orbifold { .. } => "orbifold",
            CheckSpec::TraceDomination { .. } => "trace_domination",
            CheckSpec::Bootstrap { .. } => "bootstrap",
        }
    }

    pub fn model(&self) -> Option<&str> {
        match self {
            CheckSpec::Axioms { model, .. }
            | CheckSpec::Unitarity { model }
            | CheckSpec::NormTable { model, .. }
            | CheckSpec::VirasoroBound { model, .. }
            | CheckSpec::V1Bound { model, .. }
            | CheckSpec::ProductLemma { model, .. }
            | CheckSpec::PrimaryBound { model, .. }
            | CheckSpec::Orbifold { model, .. }
            | CheckSpec::TraceDomination { model, .. } => Some(model),
            CheckSpec::Bootstrap { model, .. } => model.as_deref(),
        }
    }

    fn states(&self) -> Vec<&str> {
        match self {
            CheckSpec::NormTable { state, .. }
            | CheckSpec::VirasoroBound { state, .. }
            | CheckSpec::V1Bound { state, .. }
            | CheckSpec::PrimaryBound { state, .. }
            | CheckSpec::TraceDomination { state, .. } => vec![state],
            CheckSpec::Orbifold { state: Some(s), .. } => vec![s],
            _ => Vec::new(),
        }
    }

    /// Smallest truncation the check needs.
    pub fn required_truncation(&self) -> i64 {
        match self {
            CheckSpec::Axioms { .. } | CheckSpec::Unitarity { .. } | CheckSpec::NormTable { .. } => 0,
            CheckSpec::VirasoroBound { m_max, n_max, .. } | CheckSpec::V1Bound { m_max, n_max, .. } => n_max + m_max,
            CheckSpec::ProductLemma { max_degree, n_max, .. } => (*n_max).max(2 * *max_degree as i64),
            CheckSpec::PrimaryBound { m_max, n_max, .. } => n_max + m_max,
            CheckSpec::Orbifold { degree, n_max, .. } => (*n_max).max(2 * *degree as i64),
            CheckSpec::TraceDomination { n_max, .. } => *n_max,
            CheckSpec::Bootstrap { model, n_max, .. } => {
                if model.is_some() {
                    *n_max
                } else {
                    0
                }
            }
        }
    }

    fn validate(&self, models: &BTreeMap<String, ModelEntry>) -> Result<()> {
        let bad = |msg: String| Err(VoaError::Config(format!("check {}: {msg}", self.name())));
        let windows: Vec<i64> = match self {
            CheckSpec::NormTable { m_max, n_max, .. }
            | CheckSpec::VirasoroBound { m_max, n_max, .. }
            | CheckSpec::V1Bound { m_max, n_max, .. }
            | CheckSpec::ProductLemma { m_max, n_max, .. }
            | CheckSpec::PrimaryBound { m_max, n_max, .. } => vec![*m_max, *n_max],
            CheckSpec::Orbifold { n_max, .. }
            | CheckSpec::TraceDomination { n_max, .. }
            | CheckSpec::Bootstrap { n_max, .. } => vec![*n_max],
            _ => Vec::new(),
        };
        if windows.iter().any(|w| *w < 0) {
            return bad("window bounds must be nonnegative".into());
        }
        match self {
            CheckSpec::Axioms { identities, .. } => {
                if let Some(x) = identities.iter().find(|x| AxiomKind::parse(x).is_none()) {
                    return bad(format!("unknown identity {x:?}"));
                }
            }
            CheckSpec::PrimaryBound { s: Some(s), .. } if *s < 0.0 => return bad("s must be nonnegative".into()),
            CheckSpec::Orbifold { s_values, state, automorphisms, .. } => {
                if !s_values.is_empty() && state.is_none() {
                    return bad("s_values need a state".into());
                }
                if s_values.iter().any(|s| *s < 0.0) {
                    return bad("s must be nonnegative".into());
                }
                for a in automorphisms {
                    a.kind()?;
                }
            }
            CheckSpec::TraceDomination { q_values, .. } => {
                for q in q_values {
                    let q = parse_q(q)?;
                    if q <= Q::from_integer(0.into()) || q >= q_int(1) {
                        return bad(format!("q = {q} is not in (0, 1)"));
                    }
                }
            }
            CheckSpec::Bootstrap { model, values, expect, d_values, s_max, recursion, .. } => {
                if let Some((big_d, s)) = recursion {
                    if !big_d.is_finite() || *big_d <= 0.0 || s.is_nan() || *s < 0.0 || d_values.len() != 1 {
                        return bad("fixed recursion needs D > 0, s >= 0 and a single d".into());
                    }
                }
                if model.is_some() == values.is_some() {
                    return bad("give exactly one of model and values".into());
                }
                if !["certified", "growth_detected", "inconclusive"].contains(&expect.as_str()) {
                    return bad(format!("unknown verdict {expect:?}"));
                }
                if d_values.is_empty() || d_values.contains(&0) || s_max.is_nan() || *s_max < 0.0 {
                    return bad("need d_values >= 1 and s_max >= 0".into());
                }
            }
            _ => {}
        }
        let Some(name) = self.model() else { return Ok(()) };
        let Some(entry) = models.get(name) else {
            return bad(format!("unknown model {name:?}"));
        };
        let spec = entry.spec()?;
        let required = self.required_truncation();
        if required > spec.truncation as i64 {
            return bad(format!("window needs N >= {required}, model {name} has N = {}", spec.truncation));
        }
        if let CheckSpec::Bootstrap { .. } = self {
            if !matches!(spec.kind, crate::graded_fock::ModelKind::Lattice { .. }) {
                return bad("measured bootstrap needs a lattice model".into());
            }
        }
        let names = ModelEntry::generator_names(&spec);
        for s in self.states() {
            parse_state_terms(s)?.iter().try_for_each(|(_, atom)| match atom {
                Atom::Generator(g) if !names.contains(g) => bad(format!("model {name} has no generator {g:?}")),
                _ => Ok(()),
            })?;
        }
        Ok(())
    }
}

impl SuiteConfig {
    pub fn empty() -> Self {
        Self {
            schema: SUITE_SCHEMA.into(),
            seed: default_seed(),
            tolerance: None,
            output_dir: None,
            cache_dir: None,
            jobs: None,
            models: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| VoaError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VoaError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| VoaError::Config(e.to_string()))
    }

    /// Every referenced name exists and every window fits its model.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SUITE_SCHEMA {
            return Err(VoaError::Config(format!("unknown schema {:?}", self.schema)));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(VoaError::Config("tolerance must be finite and nonnegative".into()));
            }
        }
        for (name, entry) in &self.models {
            entry.spec().map_err(|e| VoaError::Config(format!("model {name}: {e}")))?;
        }
        for check in &self.checks {
            check.validate(&self.models).map_err(|e| match e {
                VoaError::Config(_) => e,
                other => VoaError::Config(format!("check {}: {other}", check.name())),
            })?;
        }
        Ok(())
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(DEFAULT_TOLERANCE)
    }

    /// The configuration the acceptance criteria are stated for.
    pub fn default_suite() -> Self {
        let mut c = Self::empty();
        let heis = |n| ModelEntry::Heisenberg { rank: Some(1), metric: None, truncation: n, mutations: vec![] };
        let vir = |c: &str, n| ModelEntry::Virasoro { c: c.into(), truncation: n, mutations: vec![] };
        let lat = |q, n| ModelEntry::Lattice { q, truncation: n, mutations: vec![] };
        for (name, entry) in [
            ("heisenberg", heis(8)),
            ("virasoro_half", vir("1/2", 8)),
            ("virasoro_one", vir("1", 8)),
            ("lattice2", lat(2, 6)),
            ("heisenberg_wide", heis(14)),
            ("virasoro_half_wide", vir("1/2", 16)),
            ("virasoro_one_wide", vir("1", 16)),
            ("lattice2_wide", lat(2, 14)),
            ("lattice2_bootstrap", lat(2, 10)),
            ("lattice2_product", lat(2, 8)),
            ("lattice4", lat(4, 12)),
            ("heisenberg_trace", heis(12)),
        ] {
            c.models.insert(name.into(), entry);
        }
        for m in ["heisenberg", "virasoro_half", "virasoro_one", "lattice2"] {
            c.checks.push(CheckSpec::Axioms {
                model: m.into(),
                tuples: 500,
                identities: vec![],
                generator_sweep: true,
            });
            c.checks.push(CheckSpec::Unitarity { model: m.into() });
        }
        for (m, s) in [("heisenberg", "a0"), ("virasoro_half", "conformal"), ("lattice2", "e+"), ("lattice4", "e+")] {
            c.checks.push(CheckSpec::NormTable { model: m.into(), state: s.into(), m_max: 3, n_max: 6 });
        }
        for m in ["virasoro_half_wide", "virasoro_one_wide"] {
            c.checks.push(CheckSpec::VirasoroBound { model: m.into(), state: conformal(), m_max: 6, n_max: 10 });
        }
        for (m, s) in [("heisenberg_wide", "a0"), ("lattice2_wide", "a"), ("lattice2_wide", "e+ + e-")] {
            c.checks.push(CheckSpec::V1Bound { model: m.into(), state: s.into(), m_max: 6, n_max: 8 });
        }
        for m in ["heisenberg", "virasoro_half", "virasoro_one", "lattice2_product"] {
            c.checks.push(CheckSpec::ProductLemma { model: m.into(), max_degree: 2, m_max: 4, n_max: 8 });
        }
        c.checks.push(CheckSpec::PrimaryBound {
            model: "lattice4".into(),
            state: "e+".into(),
            m_max: 4,
            n_max: 8,
            s: None,
        });
        c.checks.push(CheckSpec::Orbifold {
            model: "heisenberg_wide".into(),
            degree: 1,
            automorphisms: vec![AutomorphismEntry::ChargeConjugation],
            state: Some("a0".into()),
            s_values: vec![0.5, 1.0],
            n_max: 10,
        });
        c.checks.push(CheckSpec::TraceDomination {
            model: "heisenberg_trace".into(),
            state: "a0".into(),
            q_values: vec!["1/4".into(), "1/2".into()],
            n_max: 12,
        });
        c.checks.push(CheckSpec::Bootstrap {
            model: Some("lattice2_bootstrap".into()),
            values: None,
            n_max: 10,
            d_values: vec![1, 2],
            s_max: 4.0,
            recursion: None,
            expect: "certified".into(),
        });
        c.checks.push(CheckSpec::Bootstrap {
            model: None,
            values: Some((0..=10).map(|n| 2f64.powi(n)).collect()),
            n_max: 0,
            d_values: vec![1],
            s_max: 0.0,
            recursion: Some((1.0, 0.0)),
            expect: "growth_detected".into(),
        });
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Atom {
    Vacuum,
    Conformal,
    Index(usize),
    Generator(String),
}

fn parse_state_terms(text: &str) -> Result<Vec<(Q, Atom)>> {
    let bad = || VoaError::Config(format!("cannot parse state {text:?}"));
    let mut out = Vec::new();
    for term in text.split(" + ") {
        let term = term.trim();
        let (coeff, atom) = match term.split_once('*') {
            Some((c, a)) => (parse_q(c).map_err(|_| bad())?, a.trim()),
            None => (q_int(1), term),
        };
        let atom = match atom {
            "" => return Err(bad()),
            "vacuum" => Atom::Vacuum,
            "conformal" => Atom::Conformal,
            _ => match atom.strip_prefix('#') {
                Some(i) => Atom::Index(i.parse().map_err(|_| bad())?),
                None => Atom::Generator(atom.to_string()),
            },
        };
        out.push((coeff, atom));
    }
    Ok(out)
}

/// Resolves a state expression on a built model.
pub fn parse_state(model: &Model, text: &str) -> Result<StateVector> {
    let mut v = StateVector::zero();
    for (c, atom) in parse_state_terms(text)? {
        let term = match atom {
            Atom::Vacuum => StateVector::basis(0),
            Atom::Conformal => model.conformal_state().clone(),
            Atom::Index(i) if i < model.basis().len() => StateVector::basis(i),
            Atom::Index(i) => return Err(VoaError::Config(format!("basis index {i} out of range"))),
            Atom::Generator(g) => {
                let idx =
                    model.generator_by_name(&g).ok_or_else(|| VoaError::Config(format!("no generator named {g:?}")))?;
                StateVector::basis(model.generators()[idx].state)
            }
        };
        v = v.plus(&term.scaled(&c));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_fock::build_model;

    #[test]
    fn default_suite_validates_and_round_trips() {
        let c = SuiteConfig::default_suite();
        c.validate().unwrap();
        let text = c.to_toml().unwrap();
        assert_eq!(SuiteConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases = [
            "schema = \"voa-suite/2\"",
            "schema = \"voa-suite/1\"\n[[checks]]\nkind = \"unitarity\"\nmodel = \"nope\"",
            "schema = \"voa-suite/1\"\n[[checks]]\nkind = \"flux\"\nmodel = \"m\"",
            "schema = \"voa-suite/1\"\n[models.m]\nkind = \"lattice\"\nq = 3\ntruncation = 4",
            "schema = \"voa-suite/1\"\n[models.m]\nkind = \"virasoro\"\nc = \"1/2\"\ntruncation = 6\n\
             [[checks]]\nkind = \"virasoro_bound\"\nmodel = \"m\"\nm_max = 6\nn_max = 10",
            "schema = \"voa-suite/1\"\n[models.m]\nkind = \"heisenberg\"\ntruncation = 6\n\
             [[checks]]\nkind = \"v1_bound\"\nmodel = \"m\"\nstate = \"e+\"\nm_max = 1\nn_max = 2",
            "schema = \"voa-suite/1\"\nbogus = 1",
        ];
        for text in cases {
            assert!(matches!(SuiteConfig::from_toml(text), Err(VoaError::Config(_))), "{text}");
        }
    }

    #[test]
    fn state_expressions() {
        let model = build_model(&ModelSpec::lattice(2, 4)).unwrap();
        let plus = model.generators()[1].state;
        let minus = model.generators()[2].state;
        let v = parse_state(&model, "e+ + 1/2*e-").unwrap();
        assert_eq!(v, StateVector::from_terms([(plus, q_int(1)), (minus, crate::rational::q_frac(1, 2))]));
        assert_eq!(parse_state(&model, "#0").unwrap(), StateVector::basis(0));
        assert!(parse_state(&model, "L").is_err());
        assert!(parse_state(&model, "x*a").is_err());
    }
}
