use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qperturb::io::{
    compare_to_experiment, fit_targets_against, load_ensemble, run_cases, BaselineSpec, ConstraintName, EnsembleFormat,
    HamiltonianSpec, RunConfig, SigmaSpec, TargetDist, OUT_DIR_ENV,
};
use qperturb::measures::MeasureReport;
use qperturb::pauli::{bell_state, BellLabel, TwoQubitHamiltonian};
use qperturb::perturb::{FailurePolicy, StudyCase};
use qperturb::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qperturb",
    version,
    about = "Constrained random perturbations of two-qubit states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a perturbed ensemble and write its tables.
    Generate(GenerateArgs),
    /// Fit targets to an experimental ensemble and compare a simulated one against it.
    Compare(CompareArgs),
    /// Print energy, entropy, and coefficient statistics of an ensemble file.
    Fit(FitArgs),
    /// Print the measures of every state in an ensemble file.
    Measures(MeasuresArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Study case 1-4, or `all` to write one subdirectory per case.
    #[arg(long, conflicts_with = "constraints")]
    case: Option<String>,
    /// Comma-separated constraint list, e.g. `trace,energy,entropy`.
    #[arg(long, value_delimiter = ',')]
    constraints: Option<Vec<String>>,
    /// Bell-diagonal coefficients c1,c2,c3 of the baseline.
    #[arg(long, value_parser = parse_list::<3>, allow_hyphen_values = true, conflicts_with_all = ["bell", "state_file"])]
    bell_diag: Option<[f64; 3]>,
    /// Pure Bell baseline: phi+, phi-, psi+, psi-.
    #[arg(long, conflicts_with = "state_file")]
    bell: Option<String>,
    /// Baseline read from a single-state ensemble file.
    #[arg(long)]
    state_file: Option<PathBuf>,
    /// Qubit frequencies in GHz.
    #[arg(long, requires = "f1")]
    f0: Option<f64>,
    #[arg(long, requires = "f0")]
    f1: Option<f64>,
    /// Standard deviation of every perturbation coefficient.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Per-sample energy targets as `mean,stddev`.
    #[arg(long, value_parser = parse_list::<2>, allow_hyphen_values = true)]
    energy_dist: Option<[f64; 2]>,
    /// Per-sample entropy targets as `mean,stddev`.
    #[arg(long, value_parser = parse_list::<2>, allow_hyphen_values = true)]
    entropy_dist: Option<[f64; 2]>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    /// Stop at the first failed multiplier solve instead of redrawing.
    #[arg(long)]
    abort_on_failure: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    seed: u64,
    /// Experimental ensemble (JSON or CSV, by extension unless --format is given).
    #[arg(long)]
    experiment: PathBuf,
    #[arg(long)]
    format: Option<String>,
    /// Draw perturbations from the fitted coefficient statistics.
    #[arg(long)]
    fit_eta: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    experiment: PathBuf,
    #[arg(long)]
    format: Option<String>,
    /// Ideal state the coefficients are measured from.
    #[arg(long, default_value = "phi+")]
    reference: String,
    #[arg(long, requires = "f1")]
    f0: Option<f64>,
    #[arg(long, requires = "f0")]
    f1: Option<f64>,
}

#[derive(Args)]
struct MeasuresArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    format: Option<String>,
    /// Reference state for fidelity and distances.
    #[arg(long, default_value = "phi+")]
    reference: String,
    #[arg(long, requires = "f1")]
    f0: Option<f64>,
    #[arg(long, requires = "f0")]
    f1: Option<f64>,
}

fn parse_list<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn parse_label(s: &str) -> Result<BellLabel> {
    BellLabel::parse(s).ok_or_else(|| invalid(format!("unknown Bell state {s:?}")))
}

fn format_for(path: &std::path::Path, flag: Option<&str>) -> Result<EnsembleFormat> {
    match flag {
        Some(f) => EnsembleFormat::parse(f).ok_or_else(|| invalid(format!("unknown format {f:?}"))),
        None => EnsembleFormat::from_path(path),
    }
}

fn hamiltonian(f0: Option<f64>, f1: Option<f64>) -> Result<TwoQubitHamiltonian> {
    match (f0, f1) {
        (Some(f0), Some(f1)) => HamiltonianSpec { f0, f1 }.build(),
        _ => Ok(TwoQubitHamiltonian::device_default()),
    }
}

fn dist(v: &[f64; 2]) -> TargetDist {
    TargetDist {
        mean: v[0],
        stddev: v[1],
    }
}

fn build_config(seed: u64, args: &RunArgs, case: Option<StudyCase>) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::new(seed),
    };
    cfg.seed = seed;
    if let Some(case) = case {
        let preset = RunConfig::study_case(case, seed, 0.05, cfg.samples);
        cfg.constraints = preset.constraints;
        cfg.hamiltonian = cfg.hamiltonian.or(preset.hamiltonian);
    }
    if let Some(names) = &args.constraints {
        cfg.constraints = names
            .iter()
            .map(|n| ConstraintName::parse(n).ok_or_else(|| invalid(format!("unknown constraint {n:?}"))))
            .collect::<Result<_>>()?;
        if cfg.constraints.first() != Some(&ConstraintName::Trace) {
            cfg.constraints.retain(|c| *c != ConstraintName::Trace);
            cfg.constraints.insert(0, ConstraintName::Trace);
        }
    }
    if let Some(c) = &args.bell_diag {
        cfg.baseline = BaselineSpec::BellDiag {
            c: [1.0, c[0], c[1], c[2]],
        };
    }
    if let Some(label) = &args.bell {
        parse_label(label)?;
        cfg.baseline = BaselineSpec::PureBell { label: label.clone() };
    }
    if let Some(path) = &args.state_file {
        cfg.baseline = BaselineSpec::StateFile { path: path.clone() };
    }
    if let (Some(f0), Some(f1)) = (args.f0, args.f1) {
        cfg.hamiltonian = Some(HamiltonianSpec { f0, f1 });
    }
    if cfg.has(ConstraintName::Energy) && cfg.hamiltonian.is_none() {
        cfg.hamiltonian = Some(HamiltonianSpec {
            f0: TwoQubitHamiltonian::DEVICE_F0,
            f1: TwoQubitHamiltonian::DEVICE_F1,
        });
    }
    if let Some(s) = args.sigma {
        cfg.sigma = SigmaSpec::Scalar(s);
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    if let Some(d) = &args.energy_dist {
        cfg.energy_dist = Some(dist(d));
    }
    if let Some(d) = &args.entropy_dist {
        cfg.entropy_dist = Some(dist(d));
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(b) = args.bins {
        cfg.bins = b;
    }
    if args.abort_on_failure {
        cfg.failure_policy = FailurePolicy::Abort;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_run(label: &str, result: &qperturb::io::SimulationResult) {
    eprintln!(
        "{label}: {} samples from {} attempts ({} failed) -> {}",
        result.ensemble.samples.len(),
        result.ensemble.attempts,
        result.ensemble.failures.len(),
        result.config.out_dir.display()
    );
}

fn generate(args: GenerateArgs) -> Result<()> {
    match args.run.case.as_deref() {
        Some("all") => {
            let base = build_config(args.seed, &args.run, None)?;
            for case in StudyCase::ALL {
                let mut cfg = build_config(args.seed, &args.run, Some(case))?;
                cfg.out_dir = base.out_dir.join(format!("case{}", case.number()));
                let result = run_cases(&cfg)?;
                report_run(&format!("case {}", case.number()), &result);
            }
            Ok(())
        }
        Some(n) => {
            let case = n
                .parse::<u8>()
                .ok()
                .and_then(StudyCase::from_number)
                .ok_or_else(|| invalid(format!("case must be 1-4 or all, got {n:?}")))?;
            let result = run_cases(&build_config(args.seed, &args.run, Some(case))?)?;
            report_run(&format!("case {n}"), &result);
            Ok(())
        }
        None => {
            let result = run_cases(&build_config(args.seed, &args.run, None)?)?;
            report_run("run", &result);
            Ok(())
        }
    }
}

fn compare(args: CompareArgs) -> Result<()> {
    let mut run = args.run.clone();
    if run.bell.is_none() && run.config.is_none() {
        run.bell = Some("phi+".into());
    }
    if run.constraints.is_none() && run.case.is_none() && run.config.is_none() {
        run.case = Some("4".into());
    }
    let case = match run.case.as_deref() {
        Some(n) => Some(
            n.parse::<u8>()
                .ok()
                .and_then(StudyCase::from_number)
                .ok_or_else(|| invalid(format!("case must be 1-4, got {n:?}")))?,
        ),
        None => None,
    };
    let mut cfg = build_config(args.seed, &run, case)?;
    cfg.fit_eta |= args.fit_eta;
    let ensemble = load_ensemble(&args.experiment, format_for(&args.experiment, args.format.as_deref())?)?;
    let result = compare_to_experiment(&cfg, &ensemble)?;
    println!("{}", serde_json::to_string_pretty(&result.overlap)?);
    report_run("simulated", &result.simulation);
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let ensemble = load_ensemble(&args.experiment, format_for(&args.experiment, args.format.as_deref())?)?;
    let h = hamiltonian(args.f0, args.f1)?;
    let baseline = qperturb::perturb::Baseline::pure_bell(parse_label(&args.reference)?)?;
    let fitted = fit_targets_against(&ensemble, &h, &baseline)?;
    println!("{}", serde_json::to_string_pretty(&fitted)?);
    Ok(())
}

fn measures(args: MeasuresArgs) -> Result<()> {
    let ensemble = load_ensemble(&args.state, format_for(&args.state, args.format.as_deref())?)?;
    let h = hamiltonian(args.f0, args.f1)?;
    let reference = bell_state(parse_label(&args.reference)?);
    let reports = ensemble
        .states
        .iter()
        .map(|rho| MeasureReport::evaluate(rho, &reference, &h))
        .collect::<Result<Vec<_>>>()?;
    println!("{}", serde_json::to_string_pretty(&reports)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Compare(a) => compare(a),
        Command::Fit(a) => fit(a),
        Command::Measures(a) => measures(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
