//! Ensemble statistics: histograms, Pearson matrices, the χ reference
//! distribution, and the linearized covariance of unit-trace corrected
//! coefficients.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::pauli::PauliCoefficients;

/// Kahan–Babuška summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (`n − 1` normalization); zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub count: usize,
    /// All values were equal; a single unit-width bin centred on them is reported.
    pub degenerate: bool,
}

impl Histogram {
    pub fn area(&self) -> f64 {
        compensated_sum(
            self.densities
                .iter()
                .zip(self.edges.windows(2))
                .map(|(d, w)| d * (w[1] - w[0])),
        )
    }
}

/// Equal-width histogram over `[min, max]` normalized to unit area. The
/// maximum falls in the last bin.
pub fn histogram_density(values: &[f64], bin_count: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    if bin_count == 0 {
        return Err(Error::InvalidConfig("bin count must be positive".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "histogram input contains non-finite values".into(),
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = values.len();
    if hi == lo {
        return Ok(Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            densities: vec![1.0],
            count: n,
            degenerate: true,
        });
    }
    let width = (hi - lo) / bin_count as f64;
    let edges: Vec<f64> = (0..=bin_count)
        .map(|i| if i == bin_count { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0usize; bin_count];
    for &v in values {
        let bin = (((v - lo) / width) as usize).min(bin_count - 1);
        counts[bin] += 1;
    }
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n as f64 * (w[1] - w[0])))
        .collect();
    Ok(Histogram {
        edges,
        densities,
        count: n,
        degenerate: false,
    })
}

/// Symmetric correlation matrix with variable labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Variables with zero variance; their rows and columns are reported as 0.
    pub degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Entry between coefficients `(i, j)` and `(k, l)` of a 16-variable matrix.
    pub fn pair(&self, ij: (usize, usize), kl: (usize, usize)) -> f64 {
        self.values[4 * ij.0 + ij.1][4 * kl.0 + kl.1]
    }

    /// Frobenius norm of the off-diagonal part.
    pub fn off_diagonal_norm(&self) -> f64 {
        let n = self.dim();
        compensated_sum(
            (0..n)
                .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| {
                    let v = self.values[a][b];
                    v * v
                }),
        )
        .sqrt()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m = m.max(self.values[a][b].abs());
                }
            }
        }
        m
    }
}

fn correlation_from_covariance(labels: Vec<String>, cov: &[Vec<f64>], zero_tol: f64) -> CorrelationMatrix {
    let n = cov.len();
    let degenerate: Vec<bool> = (0..n).map(|a| cov[a][a] <= zero_tol).collect();
    let values = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    if degenerate[a] || degenerate[b] {
                        0.0
                    } else if a == b {
                        1.0
                    } else {
                        (cov[a][b] / (cov[a][a].sqrt() * cov[b][b].sqrt())).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    CorrelationMatrix {
        labels,
        values,
        degenerate,
    }
}

/// Sample Pearson correlation between columns of equal length.
pub fn pearson_columns(labels: Vec<String>, columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    if labels.len() != columns.len() {
        return Err(Error::DimensionMismatch {
            left: labels.len(),
            right: columns.len(),
        });
    }
    let n = columns.first().map_or(0, Vec::len);
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            left: n,
            right: bad.len(),
        });
    }
    let centred: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let dof = (n - 1) as f64;
    let cov: Vec<Vec<f64>> = centred
        .iter()
        .map(|x| {
            centred
                .iter()
                .map(|y| compensated_sum(x.iter().zip(y).map(|(a, b)| a * b)) / dof)
                .collect()
        })
        .collect();
    Ok(correlation_from_covariance(labels, &cov, 0.0))
}

/// Pearson matrix of the sixteen coefficients, in row-major `(i, j)` order.
pub fn pearson_matrix(samples: &[PauliCoefficients]) -> Result<CorrelationMatrix> {
    let columns: Vec<Vec<f64>> = (0..16)
        .map(|k| samples.iter().map(|s| s.to_flat()[k]).collect())
        .collect();
    pearson_columns(PauliCoefficients::labels().to_vec(), &columns)
}

/// χ distribution with `k` degrees of freedom, scaled by `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiDistribution {
    pub k: u32,
    pub sigma: f64,
}

/// The χ law of the norm of `k` independent `N(0, σ)` variables.
pub fn chi_reference(k: u32, sigma: f64) -> Result<ChiDistribution> {
    if k == 0 {
        return Err(Error::InvalidConfig("chi distribution needs k >= 1".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("chi scale must be positive, got {sigma}")));
    }
    Ok(ChiDistribution { k, sigma })
}

impl ChiDistribution {
    /// `√2 σ Γ((k+1)/2) / Γ(k/2)`.
    pub fn mean(&self) -> f64 {
        let k = self.k as f64;
        std::f64::consts::SQRT_2 * self.sigma * (ln_gamma((k + 1.0) / 2.0) - ln_gamma(k / 2.0)).exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let k = self.k as f64;
        let u = x / self.sigma;
        if u == 0.0 {
            return if self.k == 1 {
                (2.0 / std::f64::consts::PI).sqrt() / self.sigma
            } else {
                0.0
            };
        }
        let log = (1.0 - k / 2.0) * std::f64::consts::LN_2 + (k - 1.0) * u.ln() - u * u / 2.0 - ln_gamma(k / 2.0);
        log.exp() / self.sigma
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let u = x / self.sigma;
        gamma_lr(self.k as f64 / 2.0, u * u / 2.0)
    }
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// Asymptotic p-value of the KS statistic `d` for `n` samples, using the
/// Kolmogorov series with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Result of a one-sample KS test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

pub fn ks_test(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    let statistic = ks_statistic(values, cdf)?;
    Ok(KsTest {
        statistic,
        p_value: ks_p_value(statistic, values.len()),
    })
}

fn check_unit_diagonal(eta0: &PauliCoefficients) -> Result<()> {
    let norm2: f64 = eta0.diagonal().iter().map(|v| v * v).sum();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(Error::NormalizationViolation(norm2));
    }
    Ok(())
}

/// Covariance of the unit-trace corrected coefficients, linearized around
/// the mean perturbation: `J Σ Jᵀ` with
/// `J = I/t − v vᵀ/t³`, `vᵢⱼ = δᵢⱼ η₀ᵢᵢ + μᵢⱼ`, `t = |v|`, and `Σ = diag(σᵢⱼ²)`.
pub fn jacobian_covariance(
    eta0: &PauliCoefficients,
    mu: &[[f64; 4]; 4],
    sigma: &[[f64; 4]; 4],
) -> Result<Vec<Vec<f64>>> {
    check_unit_diagonal(eta0)?;
    let v: Vec<f64> = (0..16)
        .map(|a| {
            let (i, j) = (a / 4, a % 4);
            mu[i][j] + if i == j { eta0[(i, i)] } else { 0.0 }
        })
        .collect();
    let t = compensated_sum(v.iter().map(|x| x * x)).sqrt();
    let var: Vec<f64> = (0..16).map(|a| sigma[a / 4][a % 4].powi(2)).collect();
    let jac: Vec<Vec<f64>> = (0..16)
        .map(|a| {
            (0..16)
                .map(|b| if a == b { 1.0 / t } else { 0.0 } - v[a] * v[b] / t.powi(3))
                .collect()
        })
        .collect();
    Ok((0..16)
        .map(|a| {
            (0..16)
                .map(|b| compensated_sum((0..16).map(|c| jac[a][c] * var[c] * jac[b][c])))
                .collect()
        })
        .collect())
}

/// Correlation of the unit-trace corrected coefficients for independent,
/// identically distributed zero-mean perturbations of a Bell-diagonal `γ₀`.
pub fn analytic_unit_trace_correlation(eta0: &PauliCoefficients) -> Result<CorrelationMatrix> {
    let cov = jacobian_covariance(eta0, &[[0.0; 4]; 4], &[[1.0; 4]; 4])?;
    Ok(correlation_from_covariance(
        PauliCoefficients::labels().to_vec(),
        &cov,
        1e-12,
    ))
}
