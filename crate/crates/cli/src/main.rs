use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use voa_core::axioms::{check_tuples, generator_sweep, sample_tuples, AxiomKind};
use voa_core::config::{AutomorphismEntry, CheckSpec, ModelEntry};
use voa_core::norms::NormLab;
use voa_core::suite::{exit_code_for, EXIT_OK, EXIT_VIOLATION};
use voa_core::{
    config::parse_state, export_report, run_certification_suite, ExportFormat, ModelCache, ReportBundle, SuiteConfig,
    VoaError,
};

#[derive(Parser)]
#[command(name = "voa", version, about = "Exact truncated vertex operator algebras and energy-bound certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model (or load it from the cache) and print its graded dimensions.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        /// Cache directory for model containers.
        #[arg(long, env = "VOA_CACHE_DIR", default_value = ".voa-cache")]
        cache_dir: PathBuf,
    },
    /// Check the axiom residuals on random tuples and the generator sweep.
    Axioms {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 500)]
        tuples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Restrict to one identity (borcherds, skewsymmetry, commutator, translation).
        #[arg(long)]
        identity: Vec<String>,
    },
    /// Print the graded norm table of a state.
    Norms {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "conformal")]
        state: String,
        #[arg(long, default_value_t = 3)]
        m_max: i64,
        #[arg(long, default_value_t = 6)]
        n_max: i64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run one certification check and print its report.
    Certify {
        #[arg(value_enum)]
        check: CheckName,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "conformal")]
        state: String,
        #[arg(long, default_value_t = 4)]
        m_max: i64,
        #[arg(long, default_value_t = 8)]
        n_max: i64,
        /// Corollary exponent (primary bound) or chain exponents (orbifold).
        #[arg(long)]
        s: Vec<f64>,
        /// Damping parameters for trace domination, as rationals.
        #[arg(long)]
        q: Vec<String>,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Run a whole suite from a config file (or the built-in default).
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "VOA_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        #[arg(long, env = "VOA_JOBS")]
        jobs: Option<usize>,
        #[arg(long, env = "VOA_CACHE_DIR")]
        cache_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Print the default configuration as TOML and exit.
        #[arg(long)]
        print_default: bool,
    },
    /// Convert a saved JSON report into json or csv files.
    Export {
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, env = "VOA_OUTPUT_DIR", default_value = "voa-out")]
        output_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ExportFormat::Json,
            Format::Csv => ExportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Heisenberg,
    Virasoro,
    Lattice,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckName {
    Unitarity,
    VirasoroBound,
    V1Bound,
    ProductLemma,
    PrimaryBound,
    Orbifold,
    TraceDomination,
    Bootstrap,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Truncation degree N.
    #[arg(short = 'N', long)]
    truncation: usize,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    /// Central charge (Virasoro), e.g. 1/2.
    #[arg(long, default_value = "1/2")]
    c: String,
    /// Lattice norm ⟨γ,γ⟩.
    #[arg(long = "lattice-q", default_value_t = 2)]
    lattice_q: u32,
}

impl ModelArgs {
    fn entry(&self) -> ModelEntry {
        let (truncation, mutations) = (self.truncation, vec![]);
        match self.kind {
            Kind::Heisenberg => ModelEntry::Heisenberg { rank: Some(self.rank), metric: None, truncation, mutations },
            Kind::Virasoro => ModelEntry::Virasoro { c: self.c.clone(), truncation, mutations },
            Kind::Lattice => ModelEntry::Lattice { q: self.lattice_q, truncation, mutations },
        }
    }
}

fn single_check_config(model: &ModelArgs, check: CheckSpec, tolerance: Option<f64>) -> SuiteConfig {
    let mut config = SuiteConfig::empty();
    config.tolerance = tolerance;
    config.models.insert("model".into(), model.entry());
    config.checks.push(check);
    config
}

fn report_exit(bundle: &ReportBundle) -> i32 {
    for (i, e) in bundle.entries.iter().enumerate() {
        let status = if e.pass { "pass" } else { "FAIL" };
        let model = e.model.as_deref().unwrap_or("-");
        match e.failure() {
            Some(why) => eprintln!("[{i:>3}] {status} {} {model}: {why}", e.check),
            None => eprintln!("[{i:>3}] {status} {} {model}", e.check),
        }
    }
    let s = &bundle.summary;
    eprintln!("{} checks, {} passed, {} failed, {} errors", s.checks, s.passed, s.failed, s.errors);
    bundle.exit_code()
}

fn run(cli: Cli) -> Result<i32, VoaError> {
    match cli.command {
        Command::Build { model, cache_dir } => {
            let spec = model.entry().spec()?;
            let (built, hit) = ModelCache::new(&cache_dir).load_or_build(&spec, &[])?;
            println!("model      {}", spec.label());
            println!("hash       {}", spec.content_hash());
            println!("dims       {:?}", built.basis().dims());
            println!("total      {}", built.basis().len());
            println!("generators {:?}", built.generators().iter().map(|g| g.name.as_str()).collect::<Vec<_>>());
            println!("cache      {} ({})", if hit { "hit" } else { "stored" }, cache_dir.display());
            Ok(EXIT_OK)
        }
        Command::Axioms { model, tuples, seed, identity } => {
            let built = voa_core::build_model(&model.entry().spec()?)?;
            let kinds: Vec<AxiomKind> = if identity.is_empty() {
                AxiomKind::ALL.to_vec()
            } else {
                identity
                    .iter()
                    .map(|x| AxiomKind::parse(x).ok_or_else(|| VoaError::Config(format!("unknown identity {x:?}"))))
                    .collect::<Result<_, _>>()?
            };
            let mut summaries = Vec::new();
            for kind in kinds {
                summaries.push(check_tuples(&built, kind.name(), &sample_tuples(&built, kind, tuples, seed))?);
            }
            summaries.push(check_tuples(&built, "generator_sweep", &generator_sweep(&built))?);
            let mut code = EXIT_OK;
            for s in &summaries {
                println!("{:<16} {:>6} tuples  {:>4} nonzero", s.identity, s.tuples, s.nonzero);
                if let Some(f) = &s.first_failure {
                    println!("  first failure: {f}");
                    code = EXIT_VIOLATION;
                }
            }
            Ok(code)
        }
        Command::Norms { model, state, m_max, n_max, format } => {
            let built = voa_core::build_model(&model.entry().spec()?)?;
            let lab = NormLab::new(&built)?;
            let a = parse_state(&built, &state)?;
            let table = lab.norm_table(&a, -m_max..=m_max, n_max)?;
            match format {
                Format::Csv => print!("{}", table.to_csv()?),
                Format::Json => println!("{}", table.to_json()?),
            }
            Ok(EXIT_OK)
        }
        Command::Certify { check, model, state, m_max, n_max, s, q, degree, tolerance } => {
            let name = "model".to_string();
            let spec = match check {
                CheckName::Unitarity => CheckSpec::Unitarity { model: name },
                CheckName::VirasoroBound => CheckSpec::VirasoroBound { model: name, state, m_max, n_max },
                CheckName::V1Bound => CheckSpec::V1Bound { model: name, state, m_max, n_max },
                CheckName::ProductLemma => CheckSpec::ProductLemma { model: name, max_degree: degree, m_max, n_max },
                CheckName::PrimaryBound => {
                    CheckSpec::PrimaryBound { model: name, state, m_max, n_max, s: s.first().copied() }
                }
                CheckName::Orbifold => CheckSpec::Orbifold {
                    model: name,
                    degree,
                    automorphisms: vec![AutomorphismEntry::ChargeConjugation],
                    state: (!s.is_empty()).then_some(state),
                    s_values: s,
                    n_max,
                },
                CheckName::TraceDomination => CheckSpec::TraceDomination { model: name, state, q_values: q, n_max },
                CheckName::Bootstrap => CheckSpec::Bootstrap {
                    model: Some(name),
                    values: None,
                    n_max,
                    d_values: vec![1, 2],
                    s_max: 4.0,
                    recursion: None,
                    expect: "certified".into(),
                },
            };
            let bundle = run_certification_suite(&single_check_config(&model, spec, tolerance))?;
            println!("{}", bundle.to_json()?.trim_end());
            Ok(report_exit(&bundle))
        }
        Command::Suite { config, output_dir, jobs, cache_dir, format, print_default } => {
            if print_default {
                print!("{}", SuiteConfig::default_suite().to_toml()?);
                return Ok(EXIT_OK);
            }
            let mut config = match config {
                Some(path) => SuiteConfig::from_file(&path)?,
                None => SuiteConfig::default_suite(),
            };
            if output_dir.is_some() {
                config.output_dir = output_dir;
            }
            if jobs.is_some() {
                config.jobs = jobs;
            }
            if cache_dir.is_some() {
                config.cache_dir = cache_dir;
            }
            let bundle = run_certification_suite(&config)?;
            let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("voa-out"));
            let mut written = export_report(&bundle, ExportFormat::Json, &dir)?;
            if matches!(format, Format::Csv) && !bundle.is_empty() {
                written.extend(export_report(&bundle, ExportFormat::Csv, &dir)?);
            }
            let code = report_exit(&bundle);
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            Ok(code)
        }
        Command::Export { report, format, output_dir } => {
            let bundle = ReportBundle::from_json(&std::fs::read_to_string(&report)?)?;
            for p in export_report(&bundle, format.into(), &output_dir)? {
                println!("{}", p.display());
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
