//! Two-qubit operators in the normalized Pauli product basis `½ σᵢ ⊗ σⱼ`.
//!
//! Pauli order is `(I, X, Y, Z)`; the computational basis is
//! `|00⟩, |01⟩, |10⟩, |11⟩` with qubit A as the left index.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::LazyLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, HermitianOperator};

/// Imaginary trace residue above which a projection is rejected.
const IMAG_RESIDUE_TOL: f64 = 1e-9;

pub fn pauli_matrix(k: usize) -> HermitianOperator {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match k {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, -i, i, z],
        3 => [one, z, z, -one],
        _ => panic!("Pauli index {k} out of range"),
    };
    HermitianOperator::hermitize(&ComplexMatrix::from_fn(2, |r, c| entries[2 * r + c]))
}

static PAULI_PRODUCTS: LazyLock<Vec<HermitianOperator>> = LazyLock::new(|| {
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let m = kron(pauli_matrix(i).matrix(), pauli_matrix(j).matrix()).expect("2x2 factors");
            out.push(HermitianOperator::hermitize(&m));
        }
    }
    out
});

/// `σᵢ ⊗ σⱼ` (unnormalized).
pub fn pauli_product(i: usize, j: usize) -> &'static HermitianOperator {
    &PAULI_PRODUCTS[4 * i + j]
}

/// Real coefficients `η[ω]ᵢⱼ` of a Hermitian operator `ω = ½ Σ ηᵢⱼ σᵢ ⊗ σⱼ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PauliCoefficients(pub [[f64; 4]; 4]);

impl PauliCoefficients {
    pub fn zeros() -> Self {
        Self([[0.0; 4]; 4])
    }

    pub fn from_diagonal(diag: [f64; 4]) -> Self {
        let mut eta = Self::zeros();
        for (i, d) in diag.into_iter().enumerate() {
            eta.0[i][i] = d;
        }
        eta
    }

    /// Row-major `(0,0), (0,1), …, (3,3)`.
    pub fn from_flat(flat: &[f64; 16]) -> Self {
        let mut eta = Self::zeros();
        for (k, v) in flat.iter().enumerate() {
            eta.0[k / 4][k % 4] = *v;
        }
        eta
    }

    pub fn to_flat(&self) -> [f64; 16] {
        let mut flat = [0.0; 16];
        for (k, v) in flat.iter_mut().enumerate() {
            *v = self.0[k / 4][k % 4];
        }
        flat
    }

    pub fn diagonal(&self) -> [f64; 4] {
        [self.0[0][0], self.0[1][1], self.0[2][2], self.0[3][3]]
    }

    /// Euclidean norm `(Σ ηᵢⱼ²)^½`, equal to the Hilbert–Schmidt norm of the operator.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] -= other.0[i][j];
            }
        }
        out
    }

    /// Column labels `eta_00 … eta_33` in row-major order.
    pub fn labels() -> [String; 16] {
        std::array::from_fn(|k| format!("eta_{}{}", k / 4, k % 4))
    }
}

impl Index<(usize, usize)> for PauliCoefficients {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for PauliCoefficients {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

/// `ηᵢⱼ = ½ Tr[ω (σᵢ ⊗ σⱼ)]`.
pub fn pauli_project(omega: &HermitianOperator) -> Result<PauliCoefficients> {
    if omega.dim() != 4 {
        return Err(Error::UnsupportedDimension(omega.dim()));
    }
    let mut eta = PauliCoefficients::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let t = omega.matrix().trace_product(pauli_product(i, j).matrix());
            if t.im.abs() > IMAG_RESIDUE_TOL {
                return Err(Error::NotHermitianInput { residue: t.im.abs() });
            }
            eta[(i, j)] = 0.5 * t.re;
        }
    }
    Ok(eta)
}

/// `ω = ½ Σ ηᵢⱼ σᵢ ⊗ σⱼ`.
pub fn pauli_reconstruct(eta: &PauliCoefficients) -> HermitianOperator {
    let mut acc = HermitianOperator::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            if eta[(i, j)] != 0.0 {
                acc = acc.add_scaled(pauli_product(i, j), 0.5 * eta[(i, j)]);
            }
        }
    }
    acc
}

/// Bell-diagonal state parameters: correlation coefficients `c` and the
/// eigenvalues `(a, b, cc, d)` of its square root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalSpec {
    pub c: [f64; 4],
    pub amplitudes: [f64; 4],
}

impl BellDiagonalSpec {
    /// Validates `c` and derives the amplitudes
    /// `a = ½√(c₀−c₁+c₂+c₃)`, `b = ½√(c₀+c₁−c₂+c₃)`,
    /// `cc = ½√(c₀+c₁+c₂−c₃)`, `d = ½√(c₀−c₁−c₂−c₃)`.
    pub fn from_coefficients(c: [f64; 4]) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBellCoefficients("non-finite coefficient".into()));
        }
        if (c[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBellCoefficients(format!("c0 must be 1, got {}", c[0])));
        }
        let radicands = [
            c[0] - c[1] + c[2] + c[3],
            c[0] + c[1] - c[2] + c[3],
            c[0] + c[1] + c[2] - c[3],
            c[0] - c[1] - c[2] - c[3],
        ];
        let mut amplitudes = [0.0; 4];
        for (amp, r) in amplitudes.iter_mut().zip(radicands) {
            if r < -1e-12 {
                return Err(Error::InvalidBellCoefficients(format!(
                    "negative radicand {r} for c = {c:?}"
                )));
            }
            *amp = 0.5 * r.max(0.0).sqrt();
        }
        Ok(Self {
            c: [1.0, c[1], c[2], c[3]],
            amplitudes,
        })
    }

    /// Builds the spec from non-negative amplitudes with `a² + b² + cc² + d² = 1`.
    pub fn from_amplitudes(amplitudes: [f64; 4]) -> Result<Self> {
        if amplitudes.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidBellCoefficients(format!(
                "amplitudes must be finite and non-negative: {amplitudes:?}"
            )));
        }
        let [a2, b2, c2, d2] = amplitudes.map(|v| v * v);
        let norm = a2 + b2 + c2 + d2;
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBellCoefficients(format!(
                "squared amplitudes sum to {norm}"
            )));
        }
        Ok(Self {
            c: [1.0, -a2 + b2 + c2 - d2, a2 - b2 + c2 - d2, a2 + b2 - c2 - d2],
            amplitudes,
        })
    }

    /// Eigenvalues of `ρ₀`: the squared amplitudes.
    pub fn populations(&self) -> [f64; 4] {
        self.amplitudes.map(|v| v * v)
    }
}

/// `ρ₀ = ¼ Σ cᵢ σᵢ ⊗ σᵢ`.
pub fn bell_diagonal_state(c: [f64; 4]) -> Result<(HermitianOperator, BellDiagonalSpec)> {
    let spec = BellDiagonalSpec::from_coefficients(c)?;
    Ok((bell_diagonal_density(&spec), spec))
}

pub fn bell_diagonal_density(spec: &BellDiagonalSpec) -> HermitianOperator {
    pauli_reconstruct(&PauliCoefficients::from_diagonal(spec.c.map(|v| 0.5 * v)))
}

/// Square root `γ₀` of a Bell-diagonal state, with its diagonal Pauli coefficients
/// `((a+b+cc+d), (b−a+cc−d), (a−b+cc−d), (a+b−cc−d)) / 2`.
pub fn bell_diagonal_sqrt(spec: &BellDiagonalSpec) -> (HermitianOperator, PauliCoefficients) {
    let [a, b, c, d] = spec.amplitudes;
    let eta = PauliCoefficients::from_diagonal([
        0.5 * (a + b + c + d),
        0.5 * (b - a + c - d),
        0.5 * (a - b + c - d),
        0.5 * (a + b - c - d),
    ]);
    (pauli_reconstruct(&eta), eta)
}

/// Bell-diagonal spec from four raw draws: absolute values normalized to unit
/// Euclidean norm. `None` for an all-zero draw.
pub fn bell_spec_from_raw(raw: [f64; 4]) -> Option<BellDiagonalSpec> {
    let r = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(r > 0.0 && r.is_finite()) {
        return None;
    }
    let amplitudes = raw.map(|v| v.abs() / r);
    let [a2, b2, c2, d2] = amplitudes.map(|v| v * v);
    Some(BellDiagonalSpec {
        c: [1.0, -a2 + b2 + c2 - d2, a2 - b2 + c2 - d2, a2 + b2 - c2 - d2],
        amplitudes,
    })
}

/// Random Bell-diagonal state from four uniform draws in `[-1, 1]`.
pub fn random_bell_diagonal(rng: &mut impl Rng) -> BellDiagonalSpec {
    loop {
        let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        if let Some(spec) = bell_spec_from_raw(raw) {
            return spec;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi+" | "phiplus" | "phi_plus" | "φ+" => Some(Self::PhiPlus),
            "phi-" | "phiminus" | "phi_minus" | "φ-" => Some(Self::PhiMinus),
            "psi+" | "psiplus" | "psi_plus" | "ψ+" => Some(Self::PsiPlus),
            "psi-" | "psiminus" | "psi_minus" | "ψ-" => Some(Self::PsiMinus),
            _ => None,
        }
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::PhiPlus => "phi+",
            Self::PhiMinus => "phi-",
            Self::PsiPlus => "psi+",
            Self::PsiMinus => "psi-",
        };
        f.write_str(s)
    }
}

pub fn bell_vector(label: BellLabel) -> [Complex64; 4] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    match label {
        BellLabel::PhiPlus => [h, z, z, h],
        BellLabel::PhiMinus => [h, z, z, -h],
        BellLabel::PsiPlus => [z, h, h, z],
        BellLabel::PsiMinus => [z, h, -h, z],
    }
}

/// Projector onto a Bell state.
pub fn bell_state(label: BellLabel) -> HermitianOperator {
    HermitianOperator::projector(&bell_vector(label))
}

/// `H = −½(ω₀ σ₃⊗σ₀ + ω₁ σ₀⊗σ₃)` with `ωₖ = 2π fₖ`, `ℏ = 1`, frequencies in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitHamiltonian {
    pub f0: f64,
    pub f1: f64,
    pub operator: HermitianOperator,
}

impl TwoQubitHamiltonian {
    /// Qubit frequencies of the two transmons used for the Bell-state runs.
    pub const DEVICE_F0: f64 = 4.963;
    pub const DEVICE_F1: f64 = 4.838;

    pub fn device_default() -> Self {
        build_hamiltonian(Self::DEVICE_F0, Self::DEVICE_F1).expect("positive frequencies")
    }
}

pub fn build_hamiltonian(f0: f64, f1: f64) -> Result<TwoQubitHamiltonian> {
    for f in [f0, f1] {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidFrequency(f));
        }
    }
    let w0 = 2.0 * PI * f0;
    let w1 = 2.0 * PI * f1;
    let operator =
        HermitianOperator::from_real_diagonal(&[-0.5 * (w0 + w1), -0.5 * (w0 - w1), 0.5 * (w0 - w1), 0.5 * (w0 + w1)]);
    Ok(TwoQubitHamiltonian { f0, f1, operator })
}
