use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_psd, matrix_log_ranged, range_log, HermitianOperator};
use crate::pauli::TwoQubitHamiltonian;

/// `ln 4`, the entropy of the maximally mixed two-qubit state.
pub const MAX_ENTROPY: f64 = 2.0 * LN_2;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    UnitTrace,
    Energy(TwoQubitHamiltonian),
    Entropy,
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::UnitTrace => "trace",
            Self::Energy(_) => "energy",
            Self::Entropy => "entropy",
        }
    }
}

/// How the right-hand side of a constraint is chosen for each sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Fixed(f64),
    SampledNormal { mean: f64, stddev: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub target: TargetMode,
}

impl Constraint {
    pub fn unit_trace() -> Self {
        Self {
            kind: ConstraintKind::UnitTrace,
            target: TargetMode::Fixed(1.0),
        }
    }

    pub fn energy(hamiltonian: TwoQubitHamiltonian, target: TargetMode) -> Self {
        Self {
            kind: ConstraintKind::Energy(hamiltonian),
            target,
        }
    }

    pub fn entropy(target: TargetMode) -> Self {
        Self {
            kind: ConstraintKind::Entropy,
            target,
        }
    }
}

/// Ordered constraints, unit trace first.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidConstraintSet(msg));
        match constraints.first() {
            Some(Constraint {
                kind: ConstraintKind::UnitTrace,
                target: TargetMode::Fixed(t),
            }) if *t == 1.0 => {}
            Some(Constraint {
                kind: ConstraintKind::UnitTrace,
                ..
            }) => return invalid("unit-trace target must be fixed at 1".into()),
            _ => return invalid("unit trace must be the first constraint".into()),
        }
        for (i, c) in constraints.iter().enumerate() {
            if constraints[..i].iter().any(|p| p.kind.name() == c.kind.name()) {
                return invalid(format!("duplicate {} constraint", c.kind.name()));
            }
            match c.target {
                TargetMode::Fixed(t) if !t.is_finite() => {
                    return invalid(format!("non-finite {} target", c.kind.name()))
                }
                TargetMode::SampledNormal { mean, stddev } => {
                    if matches!(c.kind, ConstraintKind::UnitTrace) {
                        return invalid("unit-trace target cannot be sampled".into());
                    }
                    if !(mean.is_finite() && stddev.is_finite() && stddev >= 0.0) {
                        return invalid(format!("bad {} distribution ({mean}, {stddev})", c.kind.name()));
                    }
                }
                _ => {}
            }
            if let (ConstraintKind::Entropy, TargetMode::Fixed(t)) = (&c.kind, c.target) {
                if !(0.0..=MAX_ENTROPY).contains(&t) {
                    return invalid(format!("entropy target {t} outside [0, ln 4]"));
                }
            }
            if let (ConstraintKind::Entropy, TargetMode::SampledNormal { mean, stddev }) = (&c.kind, c.target) {
                if stddev == 0.0 && !(0.0..=MAX_ENTROPY).contains(&mean) {
                    return invalid(format!("entropy target {mean} outside [0, ln 4]"));
                }
            }
        }
        Ok(Self { constraints })
    }

    pub fn unit_trace_only() -> Self {
        Self {
            constraints: vec![Constraint::unit_trace()],
        }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.constraints.iter().map(|c| c.kind.name()).collect()
    }

    pub fn hamiltonian(&self) -> Option<&TwoQubitHamiltonian> {
        self.constraints.iter().find_map(|c| match &c.kind {
            ConstraintKind::Energy(h) => Some(h),
            _ => None,
        })
    }
}

/// Von Neumann entropy `−Tr(ρ ln ρ)` (natural log, kernel excluded).
pub fn von_neumann_entropy(rho: &HermitianOperator) -> Result<f64> {
    let eig = eig_psd(rho)?;
    Ok(-eig.eigenvalues.iter().map(|&l| l * range_log(l)).sum::<f64>())
}

/// Expectation value constrained by `constraint`: `Tr ρ`, `Tr(ρH)`, or the
/// entropy `S = −Tr(ρ ln ρ)`.
pub fn constraint_value(rho: &HermitianOperator, constraint: &ConstraintKind) -> Result<f64> {
    match constraint {
        ConstraintKind::UnitTrace => Ok(rho.trace()),
        ConstraintKind::Energy(h) => Ok(rho.trace_product(&h.operator)),
        ConstraintKind::Entropy => von_neumann_entropy(rho),
    }
}

/// Gradient operator `Gᵢ(γ²)` whose symmetrized product `{Gᵢ, γ}` is the
/// derivative of the constrained value with respect to `γ`.
pub fn constraint_gradient(constraint: &ConstraintKind, gamma: &HermitianOperator) -> Result<HermitianOperator> {
    let n = gamma.dim();
    match constraint {
        ConstraintKind::UnitTrace => Ok(HermitianOperator::identity(n)),
        ConstraintKind::Energy(h) => Ok(h.operator.clone()),
        ConstraintKind::Entropy => {
            let log = matrix_log_ranged(&gamma.square())?;
            Ok(HermitianOperator::identity(n).add(&log).scale(-1.0))
        }
    }
}

/// Per-sample right-hand sides, in constraint order.
///
/// Sampled entropy targets outside `[0, ln 4]` are redrawn.
pub fn sample_targets(constraints: &ConstraintSet, rng: &mut impl Rng) -> Vec<f64> {
    constraints
        .constraints()
        .iter()
        .map(|c| match c.target {
            TargetMode::Fixed(t) => t,
            TargetMode::SampledNormal { mean, stddev } => loop {
                let z: f64 = rng.sample(StandardNormal);
                let t = mean + stddev * z;
                match c.kind {
                    ConstraintKind::Entropy if !(0.0..=MAX_ENTROPY).contains(&t) => continue,
                    _ => break t,
                }
            },
        })
        .collect()
}
