//! Random operators for property tests and synthetic ensembles.
//!
//! Densities are drawn from the Hilbert–Schmidt measure: `ρ = G G† / Tr(G G†)`
//! with `G` a complex Ginibre matrix.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, HermitianOperator};

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    let entries: Vec<Complex64> = (0..dim * dim).map(|_| gaussian(rng)).collect();
    ComplexMatrix::from_fn(dim, |i, j| entries[i * dim + j])
}

/// Hermitian matrix with standard normal entries (GUE up to scaling).
pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> HermitianOperator {
    let g = ginibre(rng, dim);
    HermitianOperator::hermitize(&(&g + &g.adjoint()))
}

fn hs_density(rng: &mut impl Rng, dim: usize) -> HermitianOperator {
    let g = ginibre(rng, dim);
    let w = HermitianOperator::hermitize(&(&g * &g.adjoint()));
    let t = w.trace();
    w.scale(1.0 / t)
}

/// Two-qubit density operator, full rank almost surely.
pub fn random_density(rng: &mut impl Rng) -> HermitianOperator {
    hs_density(rng, 4)
}

pub fn random_qubit_density(rng: &mut impl Rng) -> HermitianOperator {
    hs_density(rng, 2)
}

/// Normalized random pure state vector of dimension `dim`.
pub fn random_state_vector(rng: &mut impl Rng, dim: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// `ρ_A ⊗ ρ_B` for independent random qubit densities.
pub fn random_product_density(rng: &mut impl Rng) -> HermitianOperator {
    let a = random_qubit_density(rng);
    let b = random_qubit_density(rng);
    let m = crate::linalg::kron(a.matrix(), b.matrix()).expect("2x2 factors");
    HermitianOperator::hermitize(&m)
}
