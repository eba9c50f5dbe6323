//! Small dense complex linear algebra for two-qubit operators.
//!
//! Everything here works on matrices of dimension 2, 3 or 4. The eigensolver
//! is a cyclic complex Jacobi iteration, which converges in a handful of
//! sweeps at these sizes and gives results that do not depend on any
//! external LAPACK build.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermiticity tolerance applied when an operator is constructed from raw data.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues at or below this value are treated as the kernel of an operator.
pub const KERNEL_THRESHOLD: f64 = 1e-12;
/// Negative eigenvalues in `[-PSD_CLAMP, 0)` are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense row-major complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    /// Builds a matrix from row-major entries. Supported dimensions are 2, 3 and 4.
    pub fn from_rows(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: entries.len(),
                right: dim * dim,
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
        }
    }
}

/// A complex matrix known to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    /// Validates Hermiticity to [`HERMITIAN_TOL`] and stores the exactly
    /// symmetrized matrix.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let deviation = matrix.hermitian_deviation();
        if !(deviation <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::hermitize(&matrix))
    }

    /// `(A + A†)/2`, for matrices that are Hermitian up to rounding.
    pub fn hermitize(matrix: &ComplexMatrix) -> Self {
        let n = matrix.dim;
        let m = ComplexMatrix::from_fn(n, |i, j| {
            if i == j {
                Complex64::new(matrix[(i, i)].re, 0.0)
            } else {
                (matrix[(i, j)] + matrix[(j, i)].conj()) * 0.5
            }
        });
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diagonal(diag))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn projector(state: &[Complex64]) -> Self {
        let n = state.len();
        Self::hermitize(&ComplexMatrix::from_fn(n, |i, j| state[i] * state[j].conj()))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `Tr(self · other)`, real for two Hermitian operators.
    pub fn trace_product(&self, other: &Self) -> f64 {
        self.0.trace_product(&other.0).re
    }

    /// `self²`, Hermitian by construction.
    pub fn square(&self) -> Self {
        Self::hermitize(&(&self.0 * &self.0))
    }

    /// `self · other · self`.
    pub fn sandwich(&self, other: &Self) -> Self {
        Self::hermitize(&(&(&self.0 * &other.0) * &self.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        Self(ComplexMatrix {
            dim: self.0.dim,
            entries: self
                .0
                .entries
                .iter()
                .zip(&other.0.entries)
                .map(|(a, b)| a + b * s)
                .collect(),
        })
    }

    pub fn conj(&self) -> Self {
        Self(self.0.conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

impl Index<(usize, usize)> for HermitianOperator {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

/// Spectral decomposition `A = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// `V diag(f(λ)) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.eigenvalues.len();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        let m = ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * v[(j, k)].conj() * fl[k]).sum());
        HermitianOperator::hermitize(&m)
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map_spectrum(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Cyclic complex Jacobi eigendecomposition of a Hermitian operator.
pub fn eig_hermitian(a: &HermitianOperator) -> Result<EigenDecomposition> {
    let n = a.dim();
    let mut m = a.matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();

    let mut converged = scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= f64::EPSILON * 1e-2 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].norm_sqr())
            .sum();
        // the last sweep may still have reached machine precision
        if off.sqrt() > 1e-14 * scale {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let eigenvalues = order.iter().map(|&k| m[(k, k)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `m[p][q]`: `m ← U† m U`, `v ← v U`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let n = m.dim;
    let phase = (apq / r).conj();
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = 0.5 * (2.0 * r).atan2(aqq - app);
    let (s, c) = theta.sin_cos();

    // U restricted to (p, q): [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]]
    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = phase * (-s);
    let uqq = phase * c;

    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * upp + mkq * uqp;
        m[(k, q)] = mkp * upq + mkq * uqq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = upp.conj() * mpk + uqp.conj() * mqk;
        m[(q, k)] = upq.conj() * mpk + uqq.conj() * mqk;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
}

/// Eigendecomposition with eigenvalues in `[-PSD_CLAMP, 0)` clamped to zero.
pub fn eig_psd(a: &HermitianOperator) -> Result<EigenDecomposition> {
    let mut eig = eig_hermitian(a)?;
    let min = eig.min_eigenvalue();
    if min < -PSD_CLAMP {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    for l in &mut eig.eigenvalues {
        *l = l.max(0.0);
    }
    Ok(eig)
}

/// Non-negative square root of a positive semidefinite operator.
pub fn matrix_sqrt_psd(a: &HermitianOperator) -> Result<HermitianOperator> {
    Ok(eig_psd(a)?.map_spectrum(f64::sqrt))
}

/// `B ln A`: the logarithm on the range of `A`, zero on its kernel.
pub fn matrix_log_ranged(a: &HermitianOperator) -> Result<HermitianOperator> {
    Ok(eig_psd(a)?.map_spectrum(range_log))
}

/// `ln λ` above the kernel threshold, `0` otherwise.
pub fn range_log(lambda: f64) -> f64 {
    if lambda > KERNEL_THRESHOLD {
        lambda.ln()
    } else {
        0.0
    }
}

/// `XY + YX`.
pub fn anticommutator(x: &HermitianOperator, y: &HermitianOperator) -> Result<HermitianOperator> {
    x.matrix().check_same_dim(y.matrix())?;
    let xy = x.matrix() * y.matrix();
    // YX = (XY)† for Hermitian X and Y
    Ok(HermitianOperator::hermitize(&(&xy + &xy.adjoint())))
}

/// Kronecker product of two 2×2 matrices.
pub fn kron(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    for d in [x.dim, y.dim] {
        if d != 2 {
            return Err(Error::UnsupportedDimension(d));
        }
    }
    Ok(ComplexMatrix::from_fn(4, |i, j| x[(i / 2, j / 2)] * y[(i % 2, j % 2)]))
}

/// Which qubit of the pair survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Reduced operator of one qubit. Basis order is `|00⟩, |01⟩, |10⟩, |11⟩`
/// with qubit A as the left index.
pub fn partial_trace(rho: &HermitianOperator, keep: Subsystem) -> Result<HermitianOperator> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let m = rho.matrix();
    let reduced = match keep {
        Subsystem::A => ComplexMatrix::from_fn(2, |a, ap| (0..2).map(|b| m[(2 * a + b, 2 * ap + b)]).sum()),
        Subsystem::B => ComplexMatrix::from_fn(2, |b, bp| (0..2).map(|a| m[(2 * a + b, 2 * a + bp)]).sum()),
    };
    Ok(HermitianOperator::hermitize(&reduced))
}
