//! Distance and entanglement measures for two-qubit density operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, eig_psd, matrix_sqrt_psd, partial_trace, ComplexMatrix, HermitianOperator, Subsystem,
    KERNEL_THRESHOLD,
};
use crate::pauli::{pauli_product, TwoQubitHamiltonian};
use crate::perturb::von_neumann_entropy;

/// Largest excursion outside `[-1, 1]` that is clipped rather than rejected.
const DOMAIN_SLACK: f64 = 1e-9;

/// Square root of a spectral value, with kernel-level round-off mapped to zero.
fn root(lambda: f64) -> f64 {
    if lambda > KERNEL_THRESHOLD {
        lambda.sqrt()
    } else {
        0.0
    }
}

fn clip_unit(function: &'static str, value: f64) -> Result<f64> {
    if value.abs() > 1.0 + DOMAIN_SLACK || value.is_nan() {
        return Err(Error::DomainExcursion { function, value });
    }
    Ok(value.clamp(-1.0, 1.0))
}

/// `F = Tr √(γ₁ ρ₂ γ₁)` with `γ₁ = √ρ₁`.
pub fn fidelity(rho1: &HermitianOperator, rho2: &HermitianOperator) -> Result<f64> {
    let gamma1 = matrix_sqrt_psd(rho1)?;
    eig_psd(rho2)?;
    let inner = gamma1.sandwich(rho2);
    Ok(eig_psd(&inner)?.eigenvalues.iter().map(|&l| root(l)).sum())
}

/// Geodesic angle and chord between the square roots of two states:
/// `c = ‖γ₁ − γ₂‖_HS` and `θ = 2 arcsin(c / 2)`.
pub fn state_distance(rho1: &HermitianOperator, rho2: &HermitianOperator) -> Result<(f64, f64)> {
    let g1 = matrix_sqrt_psd(rho1)?;
    let g2 = matrix_sqrt_psd(rho2)?;
    square_root_distance(&g1, &g2)
}

/// Same as [`state_distance`] for operators that are already square roots.
pub fn square_root_distance(gamma1: &HermitianOperator, gamma2: &HermitianOperator) -> Result<(f64, f64)> {
    let chord = gamma1.sub(gamma2).frobenius_norm();
    let theta = 2.0 * clip_unit("arcsin", chord / 2.0)?.asin();
    Ok((theta, chord))
}

/// `I = S(ρ_A) + S(ρ_B) − S(ρ)`, natural log.
pub fn mutual_information(rho: &HermitianOperator) -> Result<f64> {
    let s_a = von_neumann_entropy(&partial_trace(rho, Subsystem::A)?)?;
    let s_b = von_neumann_entropy(&partial_trace(rho, Subsystem::B)?)?;
    Ok(s_a + s_b - von_neumann_entropy(rho)?)
}

/// Pauli operator used to build the spin-flipped state `ρ̃ = (σ⊗σ) ρ* (σ⊗σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpinFlip {
    /// `σ_y ⊗ σ_y`, the Wootters spin flip.
    #[default]
    PauliY,
    /// `σ_x ⊗ σ_x`.
    PauliX,
}

/// Wootters concurrence `max(0, r₁ − r₂ − r₃ − r₄)`.
pub fn concurrence(rho: &HermitianOperator) -> Result<f64> {
    concurrence_with(rho, SpinFlip::PauliY)
}

/// Concurrence with an explicit spin-flip operator. `rᵢ` are the square roots
/// of the eigenvalues of `γ ρ̃ γ`, in decreasing order.
pub fn concurrence_with(rho: &HermitianOperator, flip: SpinFlip) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let gamma = matrix_sqrt_psd(rho)?;
    let k = match flip {
        SpinFlip::PauliY => pauli_product(2, 2),
        SpinFlip::PauliX => pauli_product(1, 1),
    };
    let flipped = k.sandwich(&rho.conj());
    let mut r: Vec<f64> = eig_psd(&gamma.sandwich(&flipped))?
        .eigenvalues
        .iter()
        .map(|&l| root(l))
        .collect();
    r.sort_by(|a, b| b.total_cmp(a));
    Ok((r[0] - r[1] - r[2] - r[3]).max(0.0))
}

/// Correlation tensor `Tᵢⱼ = Tr[ρ (σᵢ ⊗ σⱼ)]`, `i, j ∈ {x, y, z}`.
pub fn correlation_tensor(rho: &HermitianOperator) -> Result<[[f64; 3]; 3]> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| rho.trace_product(pauli_product(i + 1, j + 1)))
    }))
}

/// Maximal CHSH expectation `2 √(μ₁ + μ₂)` with `μ₁ ≥ μ₂` the two largest
/// eigenvalues of `TᵀT`.
pub fn chsh_max(rho: &HermitianOperator) -> Result<f64> {
    eig_psd(rho)?;
    let t = correlation_tensor(rho)?;
    let ttt = ComplexMatrix::from_fn(3, |i, j| (0..3).map(|k| t[k][i] * t[k][j]).sum::<f64>().into());
    let eig = eig_hermitian(&HermitianOperator::hermitize(&ttt))?;
    let top = eig.eigenvalues[1].max(0.0) + eig.eigenvalues[2].max(0.0);
    Ok(2.0 * top.sqrt())
}

/// `Tr(ρ H)`.
pub fn energy_expectation(rho: &HermitianOperator, h: &TwoQubitHamiltonian) -> f64 {
    rho.trace_product(&h.operator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub fidelity: f64,
    pub theta: f64,
    pub chord: f64,
    pub energy: f64,
    pub entropy: f64,
    pub mutual_information: f64,
    pub concurrence: f64,
    pub chsh_max: f64,
}

impl MeasureReport {
    /// Measures of `rho`; fidelity and distances are taken against `reference`.
    pub fn evaluate(rho: &HermitianOperator, reference: &HermitianOperator, h: &TwoQubitHamiltonian) -> Result<Self> {
        let (theta, chord) = state_distance(reference, rho)?;
        Ok(Self {
            fidelity: fidelity(reference, rho)?,
            theta,
            chord,
            energy: energy_expectation(rho, h),
            entropy: von_neumann_entropy(rho)?,
            mutual_information: mutual_information(rho)?,
            concurrence: concurrence(rho)?,
            chsh_max: chsh_max(rho)?,
        })
    }

    pub const FIELDS: [&'static str; 8] = [
        "energy",
        "entropy",
        "mutual_information",
        "concurrence",
        "chsh_max",
        "fidelity",
        "theta",
        "chord",
    ];

    /// Values in the order of [`Self::FIELDS`].
    pub fn values(&self) -> [f64; 8] {
        [
            self.energy,
            self.entropy,
            self.mutual_information,
            self.concurrence,
            self.chsh_max,
            self.fidelity,
            self.theta,
            self.chord,
        ]
    }
}
