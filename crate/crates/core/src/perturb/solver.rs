//! Multiplier solve for the constraint correction
//! `γ_r = γ_ε − Σᵢ λᵢ {Gᵢ(γ_ε²), γ_ε}`.
//!
//! The anticommutator directions are computed once at `γ_ε` and held fixed;
//! only the residuals are re-evaluated at each candidate `γ_r`. The root
//! closest to `λ = 0` is found by damped Newton with a central-difference
//! Jacobian.

use crate::error::{Error, Result};
use crate::linalg::{anticommutator, eig_hermitian, HermitianOperator, PSD_CLAMP};
use crate::pauli::{PauliCoefficients, TwoQubitHamiltonian};

use super::constraint::{constraint_gradient, constraint_value, ConstraintKind, ConstraintSet, MAX_ENTROPY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence when the residual ∞-norm is at or below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Central-difference step for the Jacobian.
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            fd_step: 1e-7,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub gamma_r: HermitianOperator,
    pub rho_r: HermitianOperator,
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    /// Signed residuals `value_i(γ_r²) − target_i`.
    pub residuals: Vec<f64>,
}

impl ConstrainedSolution {
    pub fn residual_max(&self) -> f64 {
        inf_norm(&self.residuals)
    }
}

struct Correction<'a> {
    gamma_eps: &'a HermitianOperator,
    directions: Vec<HermitianOperator>,
    kinds: Vec<&'a ConstraintKind>,
    targets: &'a [f64],
}

impl Correction<'_> {
    fn gamma(&self, lambdas: &[f64]) -> HermitianOperator {
        self.directions
            .iter()
            .zip(lambdas)
            .fold(self.gamma_eps.clone(), |acc, (dir, &l)| acc.add_scaled(dir, -l))
    }

    fn residuals(&self, lambdas: &[f64]) -> Result<Vec<f64>> {
        let rho = self.gamma(lambdas).square();
        self.kinds
            .iter()
            .zip(self.targets)
            .map(|(kind, &t)| Ok(constraint_value(&rho, kind)? - t))
            .collect()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Gaussian elimination with partial pivoting; `None` for a singular system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 0.0 && a[pivot][col].is_finite()) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn apply_constraints(
    gamma_eps: &HermitianOperator,
    constraints: &ConstraintSet,
    targets: &[f64],
) -> Result<ConstrainedSolution> {
    apply_constraints_with(gamma_eps, constraints, targets, &SolverOptions::default())
}

pub fn apply_constraints_with(
    gamma_eps: &HermitianOperator,
    constraints: &ConstraintSet,
    targets: &[f64],
    options: &SolverOptions,
) -> Result<ConstrainedSolution> {
    if targets.len() != constraints.len() {
        return Err(Error::InvalidConstraintSet(format!(
            "{} targets for {} constraints",
            targets.len(),
            constraints.len()
        )));
    }
    for (c, &t) in constraints.constraints().iter().zip(targets) {
        if matches!(c.kind, ConstraintKind::Entropy) && !(0.0..=MAX_ENTROPY).contains(&t) {
            return Err(Error::InvalidConstraintSet(format!("unreachable entropy target {t}")));
        }
    }

    let kinds: Vec<&ConstraintKind> = constraints.constraints().iter().map(|c| &c.kind).collect();
    let directions = kinds
        .iter()
        .map(|kind| anticommutator(&constraint_gradient(kind, gamma_eps)?, gamma_eps))
        .collect::<Result<Vec<_>>>()?;
    let problem = Correction {
        gamma_eps,
        directions,
        kinds,
        targets,
    };

    let n = targets.len();
    let mut lambdas = vec![0.0; n];
    let mut residuals = problem.residuals(&lambdas)?;
    let mut norm = inf_norm(&residuals);
    let mut iterations = 0;

    while !(norm <= options.tolerance) {
        if iterations >= options.max_iterations || norm.is_nan() {
            return Err(Error::SolverDiverged {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;

        let h = options.fd_step;
        let mut jac = vec![vec![0.0; n]; n];
        for k in 0..n {
            let mut plus = lambdas.clone();
            let mut minus = lambdas.clone();
            plus[k] += h;
            minus[k] -= h;
            let rp = problem.residuals(&plus)?;
            let rm = problem.residuals(&minus)?;
            for i in 0..n {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = solve_linear(jac, residuals.iter().map(|r| -r).collect()).ok_or(Error::SolverDiverged {
            iterations,
            residual: norm,
        })?;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=options.max_halvings {
            let trial: Vec<f64> = lambdas.iter().zip(&step).map(|(l, s)| l + alpha * s).collect();
            let r = problem.residuals(&trial)?;
            let trial_norm = inf_norm(&r);
            if trial_norm < norm {
                lambdas = trial;
                residuals = r;
                norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::SolverDiverged {
                iterations,
                residual: norm,
            });
        }
    }

    let gamma_r = problem.gamma(&lambdas);
    let rho_r = gamma_r.square();
    let min_eigenvalue = eig_hermitian(&rho_r)?.min_eigenvalue();
    if min_eigenvalue < -PSD_CLAMP {
        return Err(Error::NonPhysicalResult { min_eigenvalue });
    }
    Ok(ConstrainedSolution {
        gamma_r,
        rho_r,
        lambdas,
        iterations,
        residuals,
    })
}

/// Closed-form unit-trace correction `γ_r = γ_ε / t_ε`, `t_ε = √Tr(γ_ε²)`.
/// Returns `γ_r` and `λ_I = (1 − 1/t_ε)/2`.
pub fn analytic_unit_trace(gamma_eps: &HermitianOperator) -> (HermitianOperator, f64) {
    let t = gamma_eps.trace_product(gamma_eps).sqrt();
    (gamma_eps.scale(1.0 / t), 0.5 * (1.0 - 1.0 / t))
}

/// Coefficients of the unit-trace solution in the Pauli basis:
/// `η[γ_r]ᵢⱼ = (δᵢⱼ η[γ₀]ᵢᵢ + ηᵢⱼ) / t_ε`.
pub fn analytic_unit_trace_eta(eta0: &PauliCoefficients, eta: &PauliCoefficients) -> PauliCoefficients {
    let mut shifted = *eta;
    for i in 0..4 {
        shifted[(i, i)] += eta0[(i, i)];
    }
    let t = shifted.norm();
    PauliCoefficients(shifted.0.map(|row| row.map(|v| v / t)))
}

/// Scalar coefficients of the trace-plus-energy system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySystemCoefficients {
    /// `Tr(γ_ε²)`
    pub g1: f64,
    /// `Tr(γ_ε² H)`
    pub g2: f64,
    /// `Tr({H, γ_ε}²)`
    pub g3: f64,
    /// `Tr({H, γ_ε}² H)`
    pub g4: f64,
}

impl EnergySystemCoefficients {
    pub fn new(gamma_eps: &HermitianOperator, h: &TwoQubitHamiltonian) -> Result<Self> {
        let k = anticommutator(&h.operator, gamma_eps)?;
        let g_sq = gamma_eps.square();
        let k_sq = k.square();
        Ok(Self {
            g1: g_sq.trace(),
            g2: g_sq.trace_product(&h.operator),
            g3: k_sq.trace(),
            g4: k_sq.trace_product(&h.operator),
        })
    }
}

/// Residuals of the two-constraint (trace, energy) system written in the
/// scalar `g₁…g₄` form, for `γ_r = (1 − 2λ₁)γ_ε − λ₂{H, γ_ε}`:
///
/// ```text
/// (1−2λ₁)² g₁ − 4(1−2λ₁) λ₂ g₂ + λ₂² g₃ − 1
/// (1−2λ₁)² g₂ −  (1−2λ₁) λ₂ g₃ + λ₂² g₄ − E₀
/// ```
pub fn trace_energy_residuals(
    gamma_eps: &HermitianOperator,
    h: &TwoQubitHamiltonian,
    e0: f64,
    lambdas: (f64, f64),
) -> Result<(f64, f64)> {
    let g = EnergySystemCoefficients::new(gamma_eps, h)?;
    let (l1, l2) = lambdas;
    let s = 1.0 - 2.0 * l1;
    let trace = s * s * g.g1 - 4.0 * s * l2 * g.g2 + l2 * l2 * g.g3 - 1.0;
    let energy = s * s * g.g2 - s * l2 * g.g3 + l2 * l2 * g.g4 - e0;
    Ok((trace, energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_sqrt_psd;
    use crate::pauli::{bell_diagonal_sqrt, build_hamiltonian, pauli_reconstruct, BellDiagonalSpec};
    use crate::perturb::constraint::{Constraint, TargetMode};
    use crate::random::random_density;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn reference_gamma0() -> (HermitianOperator, PauliCoefficients) {
        bell_diagonal_sqrt(&BellDiagonalSpec::from_coefficients([1.0, 0.996, 0.4, -0.4]).unwrap())
    }

    fn perturb(g0: &HermitianOperator, rng: &mut impl Rng, sigma: f64) -> (HermitianOperator, PauliCoefficients) {
        let eta = PauliCoefficients(std::array::from_fn(|_| {
            std::array::from_fn(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        }));
        (g0.add(&pauli_reconstruct(&eta)), eta)
    }

    #[test]
    fn linear_solver() {
        let x = solve_linear(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(solve_linear(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn unperturbed_state_needs_no_correction() {
        let (g0, _) = reference_gamma0();
        let rho0 = g0.square();
        let h = build_hamiltonian(4.963, 4.838).unwrap();
        let e0 = rho0.trace_product(&h.operator);
        let s0 = constraint_value(&rho0, &ConstraintKind::Entropy).unwrap();
        let set = ConstraintSet::new(vec![
            Constraint::unit_trace(),
            Constraint::energy(h, TargetMode::Fixed(e0)),
            Constraint::entropy(TargetMode::Fixed(s0)),
        ])
        .unwrap();
        let sol = apply_constraints(&g0, &set, &[1.0, e0, s0]).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.lambdas.iter().all(|l| l.abs() < 1e-12));
        assert!(sol.gamma_r.max_abs_diff(&g0) < 1e-15);
    }

    #[test]
    fn unit_trace_matches_closed_form() {
        let (g0, eta0) = reference_gamma0();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let set = ConstraintSet::unit_trace_only();
        for _ in 0..200 {
            let (ge, eta) = perturb(&g0, &mut rng, 0.05);
            let sol = apply_constraints(&ge, &set, &[1.0]).unwrap();
            let (analytic, lambda) = analytic_unit_trace(&ge);
            assert!(sol.gamma_r.max_abs_diff(&analytic) < 1e-10);
            assert!((sol.lambdas[0] - lambda).abs() < 1e-10);
            let eta_r = crate::pauli::pauli_project(&sol.gamma_r).unwrap();
            let eta_a = analytic_unit_trace_eta(&eta0, &eta);
            for k in 0..16 {
                assert!((eta_r.to_flat()[k] - eta_a.to_flat()[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_constraint_agrees_with_scalar_system() {
        let (g0, _) = reference_gamma0();
        let h = build_hamiltonian(4.963, 4.838).unwrap();
        let e0 = g0.square().trace_product(&h.operator);
        let set = ConstraintSet::new(vec![
            Constraint::unit_trace(),
            Constraint::energy(h.clone(), TargetMode::Fixed(e0)),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let (ge, _) = perturb(&g0, &mut rng, 0.05);
            let sol = apply_constraints(&ge, &set, &[1.0, e0]).unwrap();
            let (r1, r2) = trace_energy_residuals(&ge, &h, e0, (sol.lambdas[0], sol.lambdas[1])).unwrap();
            assert!(r1.abs() <= 1e-10 && r2.abs() <= 1e-10, "{r1} {r2}");
        }
    }

    #[test]
    fn scalar_system_at_zero_multipliers() {
        let (g0, _) = reference_gamma0();
        let h = build_hamiltonian(4.963, 4.838).unwrap();
        let e0 = g0.square().trace_product(&h.operator);
        let (r1, r2) = trace_energy_residuals(&g0, &h, e0, (0.0, 0.0)).unwrap();
        assert!(r1.abs() < 1e-14 && r2.abs() < 1e-12);
    }

    #[test]
    fn scalar_system_without_hamiltonian_reduces_to_trace() {
        // H → 0 leaves (1 − 2λ₁)² g₁ = 1
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (g0, _) = reference_gamma0();
        let (ge, _) = perturb(&g0, &mut rng, 0.05);
        let tiny = build_hamiltonian(1e-300, 1e-300).unwrap();
        let (_, lambda) = analytic_unit_trace(&ge);
        let (r1, r2) = trace_energy_residuals(&ge, &tiny, 0.0, (lambda, 0.7)).unwrap();
        assert!(r1.abs() < 1e-14 && r2.abs() < 1e-14);
    }

    #[test]
    fn full_constraint_set_pins_values() {
        let (g0, _) = reference_gamma0();
        let rho0 = g0.square();
        let h = build_hamiltonian(4.963, 4.838).unwrap();
        let e0 = rho0.trace_product(&h.operator);
        let s0 = constraint_value(&rho0, &ConstraintKind::Entropy).unwrap();
        let set = ConstraintSet::new(vec![
            Constraint::unit_trace(),
            Constraint::energy(h.clone(), TargetMode::Fixed(e0)),
            Constraint::entropy(TargetMode::Fixed(s0)),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut solved = 0;
        for _ in 0..100 {
            let (ge, _) = perturb(&g0, &mut rng, 0.05);
            let Ok(sol) = apply_constraints(&ge, &set, &[1.0, e0, s0]) else {
                continue;
            };
            solved += 1;
            let rho = sol.gamma_r.square();
            assert!((rho.trace() - 1.0).abs() <= 1e-10);
            assert!((rho.trace_product(&h.operator) - e0).abs() <= 1e-10);
            assert!((constraint_value(&rho, &ConstraintKind::Entropy).unwrap() - s0).abs() <= 1e-10);
            assert!(eig_hermitian(&rho).unwrap().min_eigenvalue() >= -1e-12);
        }
        assert!(solved >= 90);
    }

    #[test]
    fn target_count_mismatch_is_rejected() {
        let (g0, _) = reference_gamma0();
        assert!(matches!(
            apply_constraints(&g0, &ConstraintSet::unit_trace_only(), &[1.0, 0.0]),
            Err(Error::InvalidConstraintSet(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let (g0, _) = reference_gamma0();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (ge, _) = perturb(&g0, &mut rng, 0.2);
        let opts = SolverOptions {
            max_iterations: 0,
            ..SolverOptions::default()
        };
        assert!(matches!(
            apply_constraints_with(&ge, &ConstraintSet::unit_trace_only(), &[1.0], &opts),
            Err(Error::SolverDiverged { .. })
        ));
    }

    // d/dt C((γ+tδ)²)|₀ = Tr[{G(γ²), γ} δ] for all three constraint kinds
    #[test]
    fn symmetrized_gradients_match_finite_differences() {
        let h = build_hamiltonian(4.963, 4.838).unwrap();
        let kinds = [
            ConstraintKind::UnitTrace,
            ConstraintKind::Energy(h),
            ConstraintKind::Entropy,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let gamma = matrix_sqrt_psd(&random_density(&mut rng)).unwrap();
            let delta = crate::random::random_hermitian(&mut rng, 4);
            for kind in &kinds {
                let g = constraint_gradient(kind, &gamma).unwrap();
                let analytic = anticommutator(&g, &gamma).unwrap().trace_product(&delta);
                let step = 1e-5;
                let f = |t: f64| constraint_value(&gamma.add_scaled(&delta, t).square(), kind).unwrap();
                let numeric = (f(step) - f(-step)) / (2.0 * step);
                assert!(
                    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(1.0),
                    "{kind:?}: {analytic} vs {numeric}"
                );
            }
        }
    }
}
