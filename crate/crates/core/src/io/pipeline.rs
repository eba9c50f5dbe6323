use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::matrix_sqrt_psd;
use crate::measures::{energy_expectation, MeasureReport};
use crate::pauli::{BellLabel, PauliCoefficients, TwoQubitHamiltonian};
use crate::perturb::{recover_eta, von_neumann_entropy, Baseline, Engine, Ensemble};
use crate::stats::{histogram_density, mean, pearson_matrix, std_dev, CorrelationMatrix};

use super::config::{BaselineSpec, ConstraintName, RunConfig, SigmaSpec, TargetDist};
use super::ensemble::{render_ensemble, EnsembleFormat, ExperimentEnsemble};

pub const SAMPLES_HEADER: [&str; 11] = [
    "index",
    "energy",
    "entropy",
    "mutual_information",
    "concurrence",
    "chsh_max",
    "fidelity",
    "theta",
    "chord",
    "solver_iterations",
    "residual_max",
];

/// Statistics of an experimental ensemble used to drive a comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTargets {
    pub energy_mean: f64,
    pub energy_std: f64,
    pub entropy_mean: f64,
    pub entropy_std: f64,
    pub mu_eta: [[f64; 4]; 4],
    pub sigma_eta: [[f64; 4]; 4],
}

/// Fits against the ideal `|Φ⁺⟩` baseline.
pub fn fit_targets(ensemble: &ExperimentEnsemble, h: &TwoQubitHamiltonian) -> Result<FittedTargets> {
    fit_targets_against(ensemble, h, &Baseline::pure_bell(BellLabel::PhiPlus)?)
}

/// Per-state energy, entropy, and coefficients `η = recover_eta(√ρ, γ₀)`,
/// summarized by sample mean and standard deviation.
pub fn fit_targets_against(
    ensemble: &ExperimentEnsemble,
    h: &TwoQubitHamiltonian,
    baseline: &Baseline,
) -> Result<FittedTargets> {
    if ensemble.is_empty() {
        return Err(Error::EmptyInput);
    }
    let energies: Vec<f64> = ensemble.states.iter().map(|rho| energy_expectation(rho, h)).collect();
    let entropies = ensemble
        .states
        .iter()
        .map(von_neumann_entropy)
        .collect::<Result<Vec<_>>>()?;
    let etas = experiment_etas(ensemble, baseline)?;
    let mut mu_eta = [[0.0; 4]; 4];
    let mut sigma_eta = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let column: Vec<f64> = etas.iter().map(|e| e[(i, j)]).collect();
            mu_eta[i][j] = mean(&column);
            sigma_eta[i][j] = std_dev(&column);
        }
    }
    Ok(FittedTargets {
        energy_mean: mean(&energies),
        energy_std: std_dev(&energies),
        entropy_mean: mean(&entropies),
        entropy_std: std_dev(&entropies),
        mu_eta,
        sigma_eta,
    })
}

fn experiment_etas(ensemble: &ExperimentEnsemble, baseline: &Baseline) -> Result<Vec<PauliCoefficients>> {
    ensemble
        .states
        .iter()
        .map(|rho| recover_eta(&matrix_sqrt_psd(rho)?, &baseline.gamma0))
        .collect()
}

/// A generated ensemble together with its per-sample measures.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub config: RunConfig,
    pub baseline: Baseline,
    pub hamiltonian: TwoQubitHamiltonian,
    pub ensemble: Ensemble,
    /// Measures of each retained `ρ_r` against the baseline `ρ₀`.
    pub reports: Vec<MeasureReport>,
}

impl SimulationResult {
    pub fn column(&self, field: &str) -> Vec<f64> {
        let k = MeasureReport::FIELDS
            .iter()
            .position(|f| *f == field)
            .expect("known measure");
        self.reports.iter().map(|r| r.values()[k]).collect()
    }

    pub fn constrained_correlation(&self) -> Result<CorrelationMatrix> {
        pearson_matrix(
            &self
                .ensemble
                .samples
                .iter()
                .map(|s| s.eta_constrained)
                .collect::<Vec<_>>(),
        )
    }

    pub fn raw_correlation(&self) -> Result<CorrelationMatrix> {
        pearson_matrix(&self.ensemble.samples.iter().map(|s| s.eta_raw).collect::<Vec<_>>())
    }
}

fn measure_all(
    states: &[&crate::linalg::HermitianOperator],
    reference: &crate::linalg::HermitianOperator,
    h: &TwoQubitHamiltonian,
) -> Result<Vec<MeasureReport>> {
    states
        .par_iter()
        .map(|rho| MeasureReport::evaluate(rho, reference, h))
        .collect()
}

/// Generates the ensemble described by `config` without writing anything.
pub fn simulate(config: &RunConfig) -> Result<SimulationResult> {
    config.validate()?;
    let baseline = config.baseline.resolve()?;
    let hamiltonian = config.reporting_hamiltonian()?;
    let constraints = config.constraint_set(&baseline)?;
    let engine = Engine::new(baseline.clone(), constraints, config.perturbation())?.with_policy(config.failure_policy);
    let ensemble = engine.generate()?;
    let states: Vec<_> = ensemble.samples.iter().map(|s| &s.rho_r).collect();
    let reports = measure_all(&states, &baseline.rho0, &hamiltonian)?;
    Ok(SimulationResult {
        config: config.clone(),
        baseline,
        hamiltonian,
        ensemble,
        reports,
    })
}

#[derive(Debug, Clone, Serialize)]
struct MeasureSummary {
    measure: &'static str,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

fn summarize(field: &'static str, values: &[f64]) -> MeasureSummary {
    MeasureSummary {
        measure: field,
        mean: mean(values),
        std: std_dev(values),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, Serialize)]
struct FailureSummary {
    index: u64,
    reason: String,
}

#[derive(Debug, Clone, Serialize)]
struct RunSummary {
    seed: u64,
    samples: usize,
    attempts: u64,
    failure_count: usize,
    failure_rate: f64,
    constraints: Vec<&'static str>,
    baseline_energy: f64,
    baseline_entropy: f64,
    measures: Vec<MeasureSummary>,
    solver_iterations_mean: f64,
    solver_iterations_max: usize,
    residual_max: f64,
    failures: Vec<FailureSummary>,
    /// Run configuration without the output location.
    config: serde_json::Value,
}

fn config_echo(config: &RunConfig) -> Result<serde_json::Value> {
    let mut value = serde_json::to_value(config)?;
    if let Some(map) = value.as_object_mut() {
        map.remove("out_dir");
    }
    Ok(value)
}

fn float_row(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn eta_csv(etas: impl Iterator<Item = PauliCoefficients>) -> String {
    let mut text = PauliCoefficients::labels().join(",");
    text.push('\n');
    for eta in etas {
        text.push_str(&float_row(eta.to_flat()));
        text.push('\n');
    }
    text
}

pub fn correlation_csv(corr: &CorrelationMatrix) -> String {
    let mut text = corr.labels.join(",");
    text.push('\n');
    for row in &corr.values {
        text.push_str(&float_row(row.iter().copied()));
        text.push('\n');
    }
    text
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn write_file(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

fn samples_csv(result: &SimulationResult) -> String {
    let mut text = SAMPLES_HEADER.join(",");
    text.push('\n');
    for (s, r) in result.ensemble.samples.iter().zip(&result.reports) {
        let _ = writeln!(
            text,
            "{},{},{},{:?}",
            s.index,
            float_row(r.values()),
            s.solver_iterations,
            s.residual_max()
        );
    }
    text
}

/// Writes the full set of tables for one generated ensemble into `dir`.
pub fn write_outputs(result: &SimulationResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let samples = &result.ensemble.samples;

    write_file(dir, "samples.csv", &samples_csv(result), &mut written)?;
    write_file(
        dir,
        "etas_raw.csv",
        &eta_csv(samples.iter().map(|s| s.eta_raw)),
        &mut written,
    )?;
    write_file(
        dir,
        "etas_constrained.csv",
        &eta_csv(samples.iter().map(|s| s.eta_constrained)),
        &mut written,
    )?;
    write_file(
        dir,
        "corr.csv",
        &correlation_csv(&result.constrained_correlation()?),
        &mut written,
    )?;
    write_file(
        dir,
        "corr_raw.csv",
        &correlation_csv(&result.raw_correlation()?),
        &mut written,
    )?;

    for field in MeasureReport::FIELDS {
        let hist = histogram_density(&result.column(field), result.config.bins)?;
        write_file(dir, &format!("hist_{field}.json"), &json_text(&hist)?, &mut written)?;
    }

    let states = ExperimentEnsemble::new(
        samples.iter().map(|s| s.rho_r.clone()).collect(),
        samples.iter().map(|s| format!("sample {}", s.index)).collect(),
    );
    write_file(
        dir,
        "states.json",
        &render_ensemble(&states, EnsembleFormat::Json)?,
        &mut written,
    )?;

    let iterations: Vec<f64> = samples.iter().map(|s| s.solver_iterations as f64).collect();
    let summary = RunSummary {
        seed: result.config.seed,
        samples: samples.len(),
        attempts: result.ensemble.attempts,
        failure_count: result.ensemble.failures.len(),
        failure_rate: result.ensemble.failure_rate(),
        constraints: result.config.constraints.iter().map(|c| c.name()).collect(),
        baseline_energy: energy_expectation(&result.baseline.rho0, &result.hamiltonian),
        baseline_entropy: von_neumann_entropy(&result.baseline.rho0)?,
        measures: MeasureReport::FIELDS
            .iter()
            .map(|f| summarize(f, &result.column(f)))
            .collect(),
        solver_iterations_mean: mean(&iterations),
        solver_iterations_max: samples.iter().map(|s| s.solver_iterations).max().unwrap_or(0),
        residual_max: samples.iter().map(|s| s.residual_max()).fold(0.0, f64::max),
        failures: result
            .ensemble
            .failures
            .iter()
            .map(|f| FailureSummary {
                index: f.index,
                reason: f.reason.clone(),
            })
            .collect(),
        config: config_echo(&result.config)?,
    };
    write_file(dir, "summary.json", &json_text(&summary)?, &mut written)?;
    Ok(written)
}

/// Generates the configured ensemble and writes its tables to `config.out_dir`.
pub fn run_cases(config: &RunConfig) -> Result<SimulationResult> {
    let result = simulate(config)?;
    write_outputs(&result, &config.out_dir)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub measure: String,
    pub experiment_mean: f64,
    pub simulated_mean: f64,
    pub mean_difference: f64,
    pub experiment_std: f64,
    pub simulated_std: f64,
    /// Simulated over experimental standard deviation.
    pub std_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub fitted: FittedTargets,
    pub simulation: SimulationResult,
    pub experiment_reports: Vec<MeasureReport>,
    pub experiment_correlation: CorrelationMatrix,
    pub overlap: Vec<Overlap>,
}

/// Configuration actually simulated for a comparison: missing target
/// distributions are filled from the fit, and with `fit_eta` the perturbation
/// statistics come from the fit as well.
pub fn comparison_config(config: &RunConfig, fitted: &FittedTargets) -> RunConfig {
    let mut sim = config.clone();
    if sim.has(ConstraintName::Energy) && sim.energy_dist.is_none() {
        sim.energy_dist = Some(TargetDist {
            mean: fitted.energy_mean,
            stddev: fitted.energy_std,
        });
    }
    if sim.has(ConstraintName::Entropy) && sim.entropy_dist.is_none() {
        sim.entropy_dist = Some(TargetDist {
            mean: fitted.entropy_mean,
            stddev: fitted.entropy_std,
        });
    }
    if sim.fit_eta {
        sim.mu = fitted.mu_eta;
        sim.sigma = SigmaSpec::Matrix(fitted.sigma_eta);
    }
    sim
}

/// Simulates an ensemble shaped by the experimental statistics and writes
/// paired experiment/simulation tables plus an overlap summary.
pub fn compare_to_experiment(config: &RunConfig, ensemble: &ExperimentEnsemble) -> Result<ComparisonResult> {
    config.validate()?;
    if ensemble.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !matches!(&config.baseline, BaselineSpec::PureBell { .. }) {
        return Err(Error::InvalidConfig("comparison runs need a pure Bell baseline".into()));
    }
    let baseline = config.baseline.resolve()?;
    let h = config.reporting_hamiltonian()?;
    let fitted = fit_targets_against(ensemble, &h, &baseline)?;
    let sim_config = comparison_config(config, &fitted);
    let simulation = simulate(&sim_config)?;

    let states: Vec<_> = ensemble.states.iter().collect();
    let experiment_reports = measure_all(&states, &baseline.rho0, &h)?;
    let experiment_correlation = pearson_matrix(&experiment_etas(ensemble, &baseline)?)?;

    let overlap = MeasureReport::FIELDS
        .iter()
        .enumerate()
        .map(|(k, field)| {
            let exp: Vec<f64> = experiment_reports.iter().map(|r| r.values()[k]).collect();
            let sim = simulation.column(field);
            let (em, sm, es, ss) = (mean(&exp), mean(&sim), std_dev(&exp), std_dev(&sim));
            Overlap {
                measure: field.to_string(),
                experiment_mean: em,
                simulated_mean: sm,
                mean_difference: sm - em,
                experiment_std: es,
                simulated_std: ss,
                std_ratio: (es > 0.0).then(|| ss / es),
            }
        })
        .collect();

    let dir = &config.out_dir;
    let mut written = Vec::new();
    std::fs::create_dir_all(dir)?;
    let mut exp_csv = SAMPLES_HEADER[..9].join(",");
    exp_csv.push('\n');
    for (i, r) in experiment_reports.iter().enumerate() {
        let _ = writeln!(exp_csv, "{i},{}", float_row(r.values()));
    }
    write_file(dir, "experiment_samples.csv", &exp_csv, &mut written)?;
    write_file(
        dir,
        "corr_experiment.csv",
        &correlation_csv(&experiment_correlation),
        &mut written,
    )?;
    write_file(
        dir,
        "corr_simulated.csv",
        &correlation_csv(&simulation.constrained_correlation()?),
        &mut written,
    )?;
    write_file(dir, "fitted_targets.json", &json_text(&fitted)?, &mut written)?;
    write_file(dir, "overlap.json", &json_text(&overlap)?, &mut written)?;
    write_outputs(&simulation, &dir.join("simulated"))?;

    Ok(ComparisonResult {
        fitted,
        simulation,
        experiment_reports,
        experiment_correlation,
        overlap,
    })
}
