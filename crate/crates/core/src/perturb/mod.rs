//! Random perturbations of a square-root state and their constraint
//! corrections.
//!
//! Every sample index owns two independent ChaCha20 streams derived from the
//! run seed: stream `2i` draws the perturbation coefficients and stream
//! `2i + 1` draws sampled constraint targets. Samples are therefore
//! reproducible individually and the ensemble does not depend on how work is
//! split across threads.

pub mod constraint;
pub mod solver;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, matrix_sqrt_psd, HermitianOperator};
use crate::pauli::{
    bell_diagonal_density, bell_diagonal_sqrt, bell_state, pauli_project, pauli_reconstruct, BellDiagonalSpec,
    BellLabel, PauliCoefficients, TwoQubitHamiltonian,
};

pub use constraint::{
    constraint_gradient, constraint_value, sample_targets, von_neumann_entropy, Constraint, ConstraintKind,
    ConstraintSet, TargetMode, MAX_ENTROPY,
};
pub use solver::{
    analytic_unit_trace, analytic_unit_trace_eta, apply_constraints, apply_constraints_with, trace_energy_residuals,
    ConstrainedSolution, EnergySystemCoefficients, SolverOptions,
};

/// Unperturbed state `ρ₀`, its square root `γ₀`, and `η[γ₀]`.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub rho0: HermitianOperator,
    pub gamma0: HermitianOperator,
    pub eta0: PauliCoefficients,
}

impl Baseline {
    /// Square root of an arbitrary density, renormalized to unit trace.
    pub fn from_density(rho: &HermitianOperator) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(Error::UnsupportedDimension(rho.dim()));
        }
        let t = rho.trace();
        if !(t > 0.0) {
            return Err(Error::NormalizationViolation(t));
        }
        let rho0 = rho.scale(1.0 / t);
        let gamma0 = matrix_sqrt_psd(&rho0)?;
        Self::assemble(rho0, gamma0)
    }

    pub fn from_bell_diagonal(spec: &BellDiagonalSpec) -> Result<Self> {
        let (gamma0, eta0) = bell_diagonal_sqrt(spec);
        let rho0 = bell_diagonal_density(spec);
        check_normalized(&gamma0)?;
        Ok(Self { rho0, gamma0, eta0 })
    }

    /// A pure Bell state is a projector and therefore its own square root.
    pub fn pure_bell(label: BellLabel) -> Result<Self> {
        let rho0 = bell_state(label);
        Self::assemble(rho0.clone(), rho0)
    }

    fn assemble(rho0: HermitianOperator, gamma0: HermitianOperator) -> Result<Self> {
        check_normalized(&gamma0)?;
        let eta0 = pauli_project(&gamma0)?;
        Ok(Self { rho0, gamma0, eta0 })
    }
}

fn check_normalized(gamma: &HermitianOperator) -> Result<()> {
    let t = gamma.trace_product(gamma);
    if (t - 1.0).abs() > 1e-10 {
        return Err(Error::NormalizationViolation(t));
    }
    Ok(())
}

/// Per-entry normal distribution `ηᵢⱼ ~ N(μᵢⱼ, σᵢⱼ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub mu: [[f64; 4]; 4],
    pub sigma: [[f64; 4]; 4],
    pub seed: u64,
    pub sample_count: usize,
}

impl PerturbationConfig {
    /// Zero means and the same spread for all sixteen coefficients.
    pub fn uniform(sigma: f64, seed: u64, sample_count: usize) -> Self {
        Self {
            mu: [[0.0; 4]; 4],
            sigma: [[sigma; 4]; 4],
            seed,
            sample_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidConfig("sample_count must be positive".into()));
        }
        for (mu_row, sigma_row) in self.mu.iter().zip(&self.sigma) {
            for (&m, &s) in mu_row.iter().zip(sigma_row) {
                if !m.is_finite() {
                    return Err(Error::InvalidConfig(format!("non-finite mean {m}")));
                }
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "standard deviation must be >= 0, got {s}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random stream for the perturbation coefficients of sample `index`.
pub fn eta_rng(seed: u64, index: u64) -> ChaCha20Rng {
    sample_rng(seed, 2 * index)
}

/// Random stream for the sampled constraint targets of sample `index`.
pub fn target_rng(seed: u64, index: u64) -> ChaCha20Rng {
    sample_rng(seed, 2 * index + 1)
}

/// `γ_ε = γ₀ + ½ Σ ηᵢⱼ σᵢ ⊗ σⱼ` with the draw for sample `index`.
pub fn sample_gamma_epsilon(
    gamma0: &HermitianOperator,
    config: &PerturbationConfig,
    index: u64,
) -> (HermitianOperator, PauliCoefficients) {
    let mut rng = eta_rng(config.seed, index);
    let mut eta = PauliCoefficients::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let z: f64 = rng.sample(StandardNormal);
            eta[(i, j)] = config.mu[i][j] + config.sigma[i][j] * z;
        }
    }
    (gamma0.add(&pauli_reconstruct(&eta)), eta)
}

/// Coefficients of the net displacement `γ_r − γ₀`.
pub fn recover_eta(gamma_r: &HermitianOperator, gamma0: &HermitianOperator) -> Result<PauliCoefficients> {
    pauli_project(&gamma_r.sub(gamma0))
}

#[derive(Debug, Clone)]
pub struct PerturbedSample {
    /// Index of the random streams that produced this sample.
    pub index: u64,
    pub gamma_eps: HermitianOperator,
    pub gamma_r: HermitianOperator,
    pub rho_r: HermitianOperator,
    pub lambdas: Vec<f64>,
    pub eta_raw: PauliCoefficients,
    pub eta_constrained: PauliCoefficients,
    pub solver_iterations: usize,
    pub residuals: Vec<f64>,
    pub targets: Vec<f64>,
}

impl PerturbedSample {
    pub fn residual_max(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Skip the failed index and continue with the next one.
    #[default]
    Redraw,
    Abort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub index: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub samples: Vec<PerturbedSample>,
    /// Number of indices consumed, retained or not.
    pub attempts: u64,
    pub failures: Vec<FailureRecord>,
}

impl Ensemble {
    pub fn failure_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub baseline: Baseline,
    pub constraints: ConstraintSet,
    pub config: PerturbationConfig,
    pub solver: SolverOptions,
    pub policy: FailurePolicy,
    pub max_failure_rate: f64,
}

impl Engine {
    pub fn new(baseline: Baseline, constraints: ConstraintSet, config: PerturbationConfig) -> Result<Self> {
        config.validate()?;
        check_normalized(&baseline.gamma0)?;
        Ok(Self {
            baseline,
            constraints,
            config,
            solver: SolverOptions::default(),
            policy: FailurePolicy::Redraw,
            max_failure_rate: 0.1,
        })
    }

    pub fn with_policy(mut self, policy: FailurePolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Draws and corrects the sample for a single index.
    pub fn attempt(&self, index: u64) -> Result<PerturbedSample> {
        let (gamma_eps, eta_raw) = sample_gamma_epsilon(&self.baseline.gamma0, &self.config, index);
        let targets = sample_targets(&self.constraints, &mut target_rng(self.config.seed, index));
        let sol = apply_constraints_with(&gamma_eps, &self.constraints, &targets, &self.solver)?;
        let eta_constrained = recover_eta(&sol.gamma_r, &self.baseline.gamma0)?;
        Ok(PerturbedSample {
            index,
            gamma_eps,
            gamma_r: sol.gamma_r,
            rho_r: sol.rho_r,
            lambdas: sol.lambdas,
            eta_raw,
            eta_constrained,
            solver_iterations: sol.iterations,
            residuals: sol.residuals,
            targets,
        })
    }

    /// Generates `sample_count` retained samples.
    ///
    /// Indices are evaluated in parallel batches but consumed strictly in
    /// order, so the retained set is the same for any thread count.
    pub fn generate(&self) -> Result<Ensemble> {
        let wanted = self.config.sample_count;
        let mut samples = Vec::with_capacity(wanted);
        let mut failures = Vec::new();
        let mut next = 0u64;
        while samples.len() < wanted {
            let remaining = (wanted - samples.len()) as u64;
            let batch = remaining + remaining / 8 + 8;
            let results: Vec<Result<PerturbedSample>> =
                (next..next + batch).into_par_iter().map(|i| self.attempt(i)).collect();
            for (index, result) in (next..).zip(results) {
                next = index + 1;
                match result {
                    Ok(sample) => samples.push(sample),
                    Err(err @ (Error::SolverDiverged { .. } | Error::NonPhysicalResult { .. })) => {
                        if self.policy == FailurePolicy::Abort {
                            return Err(err);
                        }
                        failures.push(FailureRecord {
                            index,
                            reason: err.to_string(),
                        });
                        // the final rate F/(N+F) exceeds r iff F(1-r) > rN
                        let f = failures.len() as f64;
                        if f * (1.0 - self.max_failure_rate) > self.max_failure_rate * wanted as f64 {
                            return Err(Error::TooManyFailures {
                                failures: failures.len(),
                                attempts: next as usize,
                            });
                        }
                    }
                    Err(err) => return Err(err),
                }
                if samples.len() == wanted {
                    break;
                }
            }
        }
        Ok(Ensemble {
            samples,
            attempts: next,
            failures,
        })
    }
}

/// The four constraint combinations studied for the Bell-diagonal baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StudyCase {
    /// Unit trace only.
    Trace,
    /// Trace and energy.
    TraceEnergy,
    /// Trace and entropy.
    TraceEntropy,
    /// Trace, energy, and entropy.
    All,
}

impl StudyCase {
    pub const ALL: [StudyCase; 4] = [Self::Trace, Self::TraceEnergy, Self::TraceEntropy, Self::All];

    pub fn number(self) -> u8 {
        match self {
            Self::Trace => 1,
            Self::TraceEnergy => 2,
            Self::TraceEntropy => 3,
            Self::All => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.number() == n)
    }

    pub fn has_energy(self) -> bool {
        matches!(self, Self::TraceEnergy | Self::All)
    }

    pub fn has_entropy(self) -> bool {
        matches!(self, Self::TraceEntropy | Self::All)
    }

    /// Constraint set pinning energy and/or entropy to the values of `rho0`.
    pub fn baseline_constraints(self, rho0: &HermitianOperator, h: &TwoQubitHamiltonian) -> Result<ConstraintSet> {
        let energy = TargetMode::Fixed(rho0.trace_product(&h.operator));
        let entropy = TargetMode::Fixed(von_neumann_entropy(rho0)?);
        self.constraints(h, energy, entropy)
    }

    pub fn constraints(
        self,
        h: &TwoQubitHamiltonian,
        energy: TargetMode,
        entropy: TargetMode,
    ) -> Result<ConstraintSet> {
        let mut list = vec![Constraint::unit_trace()];
        if self.has_energy() {
            list.push(Constraint::energy(h.clone(), energy));
        }
        if self.has_entropy() {
            list.push(Constraint::entropy(entropy));
        }
        ConstraintSet::new(list)
    }
}

/// Smallest eigenvalue of each retained `ρ_r`; used by positivity checks.
pub fn min_eigenvalues(samples: &[PerturbedSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| Ok(eig_hermitian(&s.rho_r)?.min_eigenvalue()))
        .collect()
}
