//! Running a [`SuiteConfig`] and emitting its reports.
//!
//! Exit codes: 0 all checks pass, 1 a violation was found, 2 the
//! configuration is invalid or a check does not apply, 3 a numerical
//! failure such as a non-positive Gram block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::axioms::{check_tuples, generator_sweep, sample_tuples, AxiomKind, AxiomSummary};
use crate::certify::{
    bootstrap_analyze, bootstrap_fit, certify_orbifold_chain, certify_primary_bound, certify_product_lemma,
    certify_v1_bound, certify_virasoro_bound, lattice_top_norms, orbifold_average, trace_domination_check,
    BootstrapReport, BootstrapVerdict, BoundReport, OrbifoldReport,
};
use crate::config::{parse_state, CheckSpec, SuiteConfig};
use crate::error::{Result, VoaError};
use crate::graded_fock::{automorphism_matrices, build_model_with, Model, ModelCache, StateVector};
use crate::norms::{NormIdentityReport, NormLab, NormTable};
use crate::rational::parse_q;
use crate::unitary::{unitarity_report, UnitarityReport};

pub const REPORT_SCHEMA: &str = "voa-report/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit status for an error raised outside any single check.
pub fn exit_code_for(err: &VoaError) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Axioms { summaries: Vec<AxiomSummary> },
    Unitarity { report: UnitarityReport },
    NormTable { table: NormTable, identities: NormIdentityReport },
    Bounds { reports: Vec<BoundReport> },
    Orbifold { report: OrbifoldReport, chain: Vec<BoundReport> },
    Bootstrap { expected: String, report: BootstrapReport },
    Error { message: String, numerical: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub check: String,
    pub model: Option<String>,
    pub pass: bool,
    pub outcome: Outcome,
}

impl ReportEntry {
    fn exit_code(&self) -> i32 {
        match &self.outcome {
            Outcome::Error { numerical: true, .. } => EXIT_NUMERICAL,
            Outcome::Error { .. } => EXIT_CONFIG,
            _ if self.pass => EXIT_OK,
            _ => EXIT_VIOLATION,
        }
    }

    /// One line describing the first failure, if any.
    pub fn failure(&self) -> Option<String> {
        if self.pass {
            return None;
        }
        Some(match &self.outcome {
            Outcome::Axioms { summaries } => summaries
                .iter()
                .find(|s| !s.pass())
                .map(|s| format!("{} nonzero on {}", s.identity, s.first_failure.clone().unwrap_or_default()))
                .unwrap_or_default(),
            Outcome::Unitarity { report } => format!("form on {} is not unitary", report.model),
            Outcome::NormTable { identities, .. } => {
                format!("C* gap {:e}, shift gap {:e}", identities.cstar_gap, identities.shift_gap)
            }
            Outcome::Bounds { reports } | Outcome::Orbifold { chain: reports, .. } => reports
                .iter()
                .find(|r| !r.pass)
                .map(|r| format!("{} on {}: {:?}", r.check, r.state, r.violations().next()))
                .unwrap_or_else(|| "orbifold average failed".into()),
            Outcome::Bootstrap { expected, report } => {
                format!("expected {expected}, got {}", verdict_name(&report.verdict))
            }
            Outcome::Error { message, .. } => message.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema: String,
    pub version: String,
    /// Hash of the configuration without output and scheduling fields.
    pub config_hash: String,
    pub seed: u64,
    pub tolerance: f64,
    pub entries: Vec<ReportEntry>,
    pub summary: Summary,
}

impl ReportBundle {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s)?;
        if b.schema != REPORT_SCHEMA {
            return Err(VoaError::Format(format!("unknown schema {}", b.schema)));
        }
        Ok(b)
    }

    pub fn norm_tables(&self) -> impl Iterator<Item = (usize, &NormTable)> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, e)| match &e.outcome {
            Outcome::NormTable { table, .. } => Some((i, table)),
            _ => None,
        })
    }
}

fn verdict_name(v: &BootstrapVerdict) -> &'static str {
    match v {
        BootstrapVerdict::Certified { .. } => "certified",
        BootstrapVerdict::GrowthDetected { .. } => "growth_detected",
        BootstrapVerdict::Inconclusive { .. } => "inconclusive",
    }
}

fn config_hash(config: &SuiteConfig) -> Result<String> {
    let mut canonical = config.clone();
    canonical.output_dir = None;
    canonical.cache_dir = None;
    canonical.jobs = None;
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&canonical)?)))
}

/// Models referenced by at least one check, built (or loaded) in parallel.
fn build_models(config: &SuiteConfig) -> BTreeMap<String, std::result::Result<Model, (String, bool)>> {
    let used: Vec<&String> =
        config.models.keys().filter(|name| config.checks.iter().any(|c| c.model() == Some(name.as_str()))).collect();
    let cache = config.cache_dir.as_ref().map(ModelCache::new);
    used.par_iter()
        .map(|name| {
            let entry = &config.models[*name];
            let built = entry.spec().and_then(|spec| match &cache {
                Some(cache) => cache.load_or_build(&spec, entry.mutations()).map(|(m, _)| m),
                None => build_model_with(&spec, entry.mutations()),
            });
            ((*name).clone(), built.map_err(|e| (e.to_string(), e.is_numerical())))
        })
        .collect()
}

fn run_check(check: &CheckSpec, model: Option<&Model>, config: &SuiteConfig) -> Result<(bool, Outcome)> {
    let tol = config.tolerance();
    let need = || model.ok_or_else(|| VoaError::Config("check needs a model".into()));
    let bounds = |reports: Vec<BoundReport>| {
        let reports: Vec<BoundReport> = reports.into_iter().map(|r| r.with_tolerance(tol)).collect();
        (reports.iter().all(|r| r.pass), Outcome::Bounds { reports })
    };
    Ok(match check {
        CheckSpec::Axioms { tuples, identities, generator_sweep: sweep, .. } => {
            let model = need()?;
            let kinds: Vec<AxiomKind> = if identities.is_empty() {
                AxiomKind::ALL.to_vec()
            } else {
                identities.iter().filter_map(|x| AxiomKind::parse(x)).collect()
            };
            let mut summaries = Vec::new();
            for kind in kinds {
                let t = sample_tuples(model, kind, *tuples, config.seed);
                summaries.push(check_tuples(model, kind.name(), &t)?);
            }
            if *sweep {
                summaries.push(check_tuples(model, "generator_sweep", &generator_sweep(model))?);
            }
            (summaries.iter().all(AxiomSummary::pass), Outcome::Axioms { summaries })
        }
        CheckSpec::Unitarity { .. } => {
            let report = unitarity_report(need()?)?;
            (report.pass, Outcome::Unitarity { report })
        }
        CheckSpec::NormTable { state, m_max, n_max, .. } => {
            let model = need()?;
            let lab = NormLab::new(model)?;
            let a = parse_state(model, state)?;
            let table = lab.norm_table(&a, -m_max..=*m_max, *n_max)?;
            let identities = lab.norm_identities(&a, *m_max, *n_max)?;
            (identities.pass, Outcome::NormTable { table, identities })
        }
        CheckSpec::VirasoroBound { state, m_max, n_max, .. } => {
            let model = need()?;
            let lab = NormLab::new(model)?;
            bounds(vec![certify_virasoro_bound(&lab, &parse_state(model, state)?, *m_max, *n_max)?])
        }
        CheckSpec::V1Bound { state, m_max, n_max, .. } => {
            let model = need()?;
            let lab = NormLab::new(model)?;
            bounds(vec![certify_v1_bound(&lab, &parse_state(model, state)?, *m_max, *n_max)?])
        }
        CheckSpec::ProductLemma { max_degree, m_max, n_max, .. } => {
            let model = need()?;
            let lab = NormLab::new(model)?;
            let top = (*max_degree).min(model.truncation());
            let mut reports = Vec::new();
            for i in 0..model.basis().range(top).end {
                reports.extend(certify_product_lemma(&lab, &StateVector::basis(i), *m_max, *n_max)?);
            }
            bounds(reports)
        }
        CheckSpec::PrimaryBound { state, m_max, n_max, s, .. } => {
            let model = need()?;
            let lab = NormLab::new(model)?;
            bounds(certify_primary_bound(&lab, &parse_state(model, state)?, *m_max, *n_max, *s)?)
        }
        CheckSpec::Orbifold { degree, automorphisms, state, s_values, n_max, .. } => {
            let model = need()?;
            let auts =
                automorphisms.iter().map(|a| automorphism_matrices(model, &a.kind()?)).collect::<Result<Vec<_>>>()?;
            let (x, report) = orbifold_average(model, *degree, &auts)?;
            let mut chain = Vec::new();
            if let Some(state) = state {
                let lab = NormLab::new(model)?;
                let a = parse_state(model, state)?;
                for s in s_values {
                    chain.push(certify_orbifold_chain(&lab, &a, &x, *s, *n_max)?.with_tolerance(tol));
                }
            }
            (report.pass && chain.iter().all(|r| r.pass), Outcome::Orbifold { report, chain })
        }
        CheckSpec::TraceDomination { state, q_values, n_max, .. } => {
            let model = need()?;
            let lab = NormLab::new(model)?;
            let a = parse_state(model, state)?;
            let mut reports = Vec::new();
            for q in q_values {
                reports.extend(trace_domination_check(&lab, &a, &parse_q(q)?, *n_max)?);
            }
            bounds(reports)
        }
        CheckSpec::Bootstrap { values, n_max, d_values, s_max, recursion, expect, .. } => {
            let k = match values {
                Some(v) => v.clone(),
                None => lattice_top_norms(&NormLab::new(need()?)?, *n_max)?,
            };
            let report = match recursion {
                Some((big_d, s)) => bootstrap_analyze(&k, *big_d, *s, d_values[0])?,
                None => bootstrap_fit(&k, d_values, *s_max)?,
            };
            (verdict_name(&report.verdict) == expect, Outcome::Bootstrap { expected: expect.clone(), report })
        }
    })
}

/// Runs every check of a validated configuration. Errors only for an
/// invalid configuration; failures inside checks become report entries.
pub fn run_certification_suite(config: &SuiteConfig) -> Result<ReportBundle> {
    config.validate()?;
    let run = || {
        let models = build_models(config);
        config
            .checks
            .par_iter()
            .map(|check| {
                let name = check.model().map(str::to_string);
                let model = match check.model().map(|m| &models[m]) {
                    Some(Err((message, numerical))) => {
                        let outcome = Outcome::Error { message: message.clone(), numerical: *numerical };
                        return ReportEntry { check: check.name().into(), model: name, pass: false, outcome };
                    }
                    Some(Ok(m)) => Some(m),
                    None => None,
                };
                let label = model.map(|m| m.spec().label()).or(name);
                match run_check(check, model, config) {
                    Ok((pass, outcome)) => ReportEntry { check: check.name().into(), model: label, pass, outcome },
                    Err(e) => ReportEntry {
                        check: check.name().into(),
                        model: label,
                        pass: false,
                        outcome: Outcome::Error { message: e.to_string(), numerical: e.is_numerical() },
                    },
                }
            })
            .collect::<Vec<_>>()
    };
    let entries = match config.jobs.filter(|&j| j > 0) {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| VoaError::Config(format!("cannot start {jobs} workers: {e}")))?
            .install(run),
        None => run(),
    };
    let exit_code = entries.iter().map(ReportEntry::exit_code).max().unwrap_or(EXIT_OK);
    let errors = entries.iter().filter(|e| matches!(e.outcome, Outcome::Error { .. })).count();
    let passed = entries.iter().filter(|e| e.pass).count();
    let summary = Summary { checks: entries.len(), passed, failed: entries.len() - passed - errors, errors, exit_code };
    Ok(ReportBundle {
        schema: REPORT_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(config)?,
        seed: config.seed,
        tolerance: config.tolerance(),
        entries,
        summary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = VoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(VoaError::Config(format!("unknown format {s:?} (json or csv)"))),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Summary row per entry, one table file per norm table and one file with
/// all bound cells.
fn csv_files(bundle: &ReportBundle) -> Result<Vec<(String, String)>> {
    if bundle.is_empty() {
        return Err(VoaError::Format("empty bundle".into()));
    }
    let mut files = Vec::new();
    let mut summary = String::from("entry,check,model,pass,failure\n");
    let mut cells = String::from("entry,check,model,state,m,n,lhs,rhs,margin\n");
    for (i, e) in bundle.entries.iter().enumerate() {
        let model = e.model.clone().unwrap_or_default();
        let failure = e.failure().unwrap_or_default();
        let _ = writeln!(summary, "{i},{},{},{},{}", e.check, csv_field(&model), e.pass, csv_field(&failure));
        let reports: &[BoundReport] = match &e.outcome {
            Outcome::Bounds { reports } => reports,
            Outcome::Orbifold { chain, .. } => chain,
            _ => &[],
        };
        for r in reports {
            for c in &r.cells {
                let _ = writeln!(
                    cells,
                    "{i},{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
                    r.check,
                    csv_field(&r.model),
                    csv_field(&r.state),
                    c.m,
                    c.n,
                    c.lhs,
                    c.rhs,
                    c.margin
                );
            }
        }
    }
    files.push(("summary.csv".to_string(), summary));
    files.push(("bounds.csv".to_string(), cells));
    for (i, table) in bundle.norm_tables() {
        files.push((format!("norm_table_{i:03}.csv"), table.to_csv()?));
    }
    Ok(files)
}

/// Writes the bundle into `dir` and returns the written paths.
pub fn export_report(bundle: &ReportBundle, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = match format {
        ExportFormat::Json => vec![("report.json".to_string(), bundle.to_json()?)],
        ExportFormat::Csv => csv_files(bundle)?,
    };
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelEntry;
    use crate::graded_fock::Mutation;
    use crate::rational::q_int;

    fn small() -> SuiteConfig {
        let mut c = SuiteConfig::empty();
        c.models.insert(
            "h".into(),
            ModelEntry::Heisenberg { rank: Some(1), metric: None, truncation: 6, mutations: vec![] },
        );
        c.checks.push(CheckSpec::Axioms { model: "h".into(), tuples: 20, identities: vec![], generator_sweep: true });
        c.checks.push(CheckSpec::NormTable { model: "h".into(), state: "a0".into(), m_max: 2, n_max: 4 });
        c.checks.push(CheckSpec::V1Bound { model: "h".into(), state: "a0".into(), m_max: 2, n_max: 4 });
        c
    }

    #[test]
    fn empty_check_list_gives_empty_bundle() {
        let b = run_certification_suite(&SuiteConfig::empty()).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.exit_code(), EXIT_OK);
        let dir = tempfile::tempdir().unwrap();
        assert!(export_report(&b, ExportFormat::Csv, dir.path()).is_err());
    }

    #[test]
    fn small_suite_passes_and_round_trips() {
        let b = run_certification_suite(&small()).unwrap();
        assert_eq!(b.exit_code(), EXIT_OK, "{b:#?}");
        assert_eq!(ReportBundle::from_json(&b.to_json().unwrap()).unwrap(), b);
        let dir = tempfile::tempdir().unwrap();
        let csv = export_report(&b, ExportFormat::Csv, dir.path()).unwrap();
        assert_eq!(csv.len(), 3);
        let table = std::fs::read_to_string(dir.path().join("norm_table_001.csv")).unwrap();
        assert!(table.starts_with("m,n,norm\n"));
    }

    #[test]
    fn mutation_is_a_violation() {
        let mut c = small();
        let mu = Mutation { generator: 0, mode: -1, source: 0, target: 1, delta: q_int(1) };
        c.models.get_mut("h").unwrap().mutations_mut().push(mu);
        let b = run_certification_suite(&c).unwrap();
        assert_eq!(b.exit_code(), EXIT_VIOLATION);
        assert!(b.entries[0].failure().unwrap().contains("nonzero on"));
    }

    #[test]
    fn inapplicable_check_is_a_config_error() {
        let mut c = small();
        c.checks.push(CheckSpec::V1Bound { model: "h".into(), state: "conformal".into(), m_max: 1, n_max: 2 });
        let b = run_certification_suite(&c).unwrap();
        assert_eq!(b.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn job_count_does_not_change_reports() {
        let mut c = small();
        c.jobs = Some(1);
        let one = run_certification_suite(&c).unwrap().to_json().unwrap();
        c.jobs = Some(4);
        assert_eq!(run_certification_suite(&c).unwrap().to_json().unwrap(), one);
    }
}
