use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{build_hamiltonian, BellDiagonalSpec, BellLabel, TwoQubitHamiltonian};
use crate::perturb::{
    von_neumann_entropy, Baseline, Constraint, ConstraintSet, FailurePolicy, PerturbationConfig, StudyCase, TargetMode,
};

use super::ensemble::{load_ensemble, EnsembleFormat};

/// Bell-diagonal coefficients used when no baseline is given.
pub const DEFAULT_BELL_COEFFICIENTS: [f64; 4] = [1.0, 0.996, 0.4, -0.4];

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QPERTURB_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineSpec {
    BellDiag {
        c: [f64; 4],
    },
    /// Ensemble file holding exactly one state.
    StateFile {
        path: PathBuf,
    },
    PureBell {
        label: String,
    },
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self::BellDiag {
            c: DEFAULT_BELL_COEFFICIENTS,
        }
    }
}

impl BaselineSpec {
    pub fn resolve(&self) -> Result<Baseline> {
        match self {
            Self::BellDiag { c } => Baseline::from_bell_diagonal(&BellDiagonalSpec::from_coefficients(*c)?),
            Self::PureBell { label } => {
                let label = BellLabel::parse(label)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown Bell state label {label:?}")))?;
                Baseline::pure_bell(label)
            }
            Self::StateFile { path } => {
                let ens = load_ensemble(path, EnsembleFormat::from_path(path)?)?;
                match ens.states.as_slice() {
                    [rho] => Baseline::from_density(rho),
                    other => Err(Error::InvalidConfig(format!(
                        "baseline file {} holds {} states, expected 1",
                        path.display(),
                        other.len()
                    ))),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintName {
    Trace,
    Energy,
    Entropy,
}

impl ConstraintName {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trace" => Some(Self::Trace),
            "energy" => Some(Self::Energy),
            "entropy" => Some(Self::Entropy),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Trace => "trace",
            Self::Energy => "energy",
            Self::Entropy => "entropy",
        }
    }
}

/// Qubit frequencies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub f0: f64,
    pub f1: f64,
}

impl HamiltonianSpec {
    pub fn build(&self) -> Result<TwoQubitHamiltonian> {
        build_hamiltonian(self.f0, self.f1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Scalar(f64),
    Matrix([[f64; 4]; 4]),
}

impl SigmaSpec {
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        match *self {
            Self::Scalar(s) => [[s; 4]; 4],
            Self::Matrix(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetDist {
    pub mean: f64,
    pub stddev: f64,
}

impl TargetDist {
    pub fn mode(&self) -> TargetMode {
        TargetMode::SampledNormal {
            mean: self.mean,
            stddev: self.stddev,
        }
    }
}

fn default_constraints() -> Vec<ConstraintName> {
    vec![ConstraintName::Trace]
}

fn default_sigma() -> SigmaSpec {
    SigmaSpec::Scalar(0.05)
}

fn default_samples() -> usize {
    1000
}

fn default_bins() -> usize {
    30
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub baseline: BaselineSpec,
    #[serde(default = "default_constraints")]
    pub constraints: Vec<ConstraintName>,
    /// Required when energy is constrained; otherwise only used for reporting
    /// energies, with the device frequencies as fallback.
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default = "default_sigma")]
    pub sigma: SigmaSpec,
    #[serde(default)]
    pub mu: [[f64; 4]; 4],
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    /// Per-sample energy targets; the baseline energy is pinned when absent.
    #[serde(default)]
    pub energy_dist: Option<TargetDist>,
    /// Per-sample entropy targets; the baseline entropy is pinned when absent.
    #[serde(default)]
    pub entropy_dist: Option<TargetDist>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
    /// Draw perturbations from the coefficient statistics fitted to the
    /// experimental ensemble instead of `mu`/`sigma` (comparison runs only).
    #[serde(default)]
    pub fit_eta: bool,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            baseline: BaselineSpec::default(),
            constraints: default_constraints(),
            hamiltonian: None,
            sigma: default_sigma(),
            mu: [[0.0; 4]; 4],
            samples: default_samples(),
            seed,
            energy_dist: None,
            entropy_dist: None,
            out_dir: default_out_dir(),
            bins: default_bins(),
            failure_policy: FailurePolicy::default(),
            fit_eta: false,
        }
    }

    /// One of the four Bell-diagonal study cases with baseline-pinned targets
    /// and the device Hamiltonian.
    pub fn study_case(case: StudyCase, seed: u64, sigma: f64, samples: usize) -> Self {
        let mut constraints = vec![ConstraintName::Trace];
        if case.has_energy() {
            constraints.push(ConstraintName::Energy);
        }
        if case.has_entropy() {
            constraints.push(ConstraintName::Entropy);
        }
        Self {
            constraints,
            hamiltonian: Some(HamiltonianSpec {
                f0: TwoQubitHamiltonian::DEVICE_F0,
                f1: TwoQubitHamiltonian::DEVICE_F1,
            }),
            sigma: SigmaSpec::Scalar(sigma),
            samples,
            ..Self::new(seed)
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            record: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn has(&self, name: ConstraintName) -> bool {
        self.constraints.contains(&name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.first() != Some(&ConstraintName::Trace) {
            return Err(Error::InvalidConfig("constraints must start with trace".into()));
        }
        let mut sorted = self.constraints.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.constraints.len() {
            return Err(Error::InvalidConfig("duplicate constraint".into()));
        }
        if self.has(ConstraintName::Energy) && self.hamiltonian.is_none() {
            return Err(Error::InvalidConfig("energy constraint requires a hamiltonian".into()));
        }
        if self.energy_dist.is_some() && !self.has(ConstraintName::Energy) {
            return Err(Error::InvalidConfig(
                "energy_dist given without an energy constraint".into(),
            ));
        }
        if self.entropy_dist.is_some() && !self.has(ConstraintName::Entropy) {
            return Err(Error::InvalidConfig(
                "entropy_dist given without an entropy constraint".into(),
            ));
        }
        for d in self.energy_dist.iter().chain(&self.entropy_dist) {
            if !(d.mean.is_finite() && d.stddev.is_finite() && d.stddev >= 0.0) {
                return Err(Error::InvalidConfig(format!("invalid target distribution {d:?}")));
            }
        }
        if self.bins == 0 {
            return Err(Error::InvalidConfig("bins must be positive".into()));
        }
        if let Some(h) = &self.hamiltonian {
            h.build()?;
        }
        self.perturbation().validate()
    }

    /// Hamiltonian used for energies: the configured one or the device default.
    pub fn reporting_hamiltonian(&self) -> Result<TwoQubitHamiltonian> {
        self.hamiltonian
            .as_ref()
            .map_or_else(|| Ok(TwoQubitHamiltonian::device_default()), HamiltonianSpec::build)
    }

    pub fn perturbation(&self) -> PerturbationConfig {
        PerturbationConfig {
            mu: self.mu,
            sigma: self.sigma.matrix(),
            seed: self.seed,
            sample_count: self.samples,
        }
    }

    /// Constraint set for `baseline`; unsampled targets are the baseline values.
    pub fn constraint_set(&self, baseline: &Baseline) -> Result<ConstraintSet> {
        let h = self.reporting_hamiltonian()?;
        let mut list = Vec::with_capacity(self.constraints.len());
        for name in &self.constraints {
            list.push(match name {
                ConstraintName::Trace => Constraint::unit_trace(),
                ConstraintName::Energy => Constraint::energy(
                    h.clone(),
                    self.energy_dist.map_or_else(
                        || TargetMode::Fixed(baseline.rho0.trace_product(&h.operator)),
                        |d| d.mode(),
                    ),
                ),
                ConstraintName::Entropy => Constraint::entropy(match self.entropy_dist {
                    Some(d) => d.mode(),
                    None => TargetMode::Fixed(von_neumann_entropy(&baseline.rho0)?),
                }),
            });
        }
        ConstraintSet::new(list)
    }
}
