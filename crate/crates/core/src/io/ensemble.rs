//! Reading and writing ensembles of 4×4 density matrices.
//!
//! JSON: `{"states": [{"label": "...", "matrix": [[[re, im], ...], ...]}]}`,
//! row-major. CSV: one state per row, 32 numbers `re00, im00, re01, ...`;
//! blank lines, `#` comments, and a non-numeric header row are skipped.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, ComplexMatrix, HermitianOperator, PSD_CLAMP};

/// Trace and positivity tolerance for tomographic input.
pub const EXPERIMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleFormat {
    Json,
    Csv,
}

impl EnsembleFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .and_then(Self::parse)
            .ok_or_else(|| Error::InvalidConfig(format!("cannot infer ensemble format of {}", path.display())))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentEnsemble {
    pub states: Vec<HermitianOperator>,
    /// One free-form annotation per state.
    pub sources: Vec<String>,
}

impl ExperimentEnsemble {
    pub fn new(states: Vec<HermitianOperator>, sources: Vec<String>) -> Self {
        Self { states, sources }
    }

    /// Labels each state with its position.
    pub fn from_states(states: Vec<HermitianOperator>) -> Self {
        let sources = (0..states.len()).map(|i| format!("state {i}")).collect();
        Self { states, sources }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    #[serde(default)]
    label: String,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    states: Vec<StateRecord>,
}

/// Checks a tomographic state against the experimental tolerances and maps
/// it onto a unit-trace PSD operator. States already within internal
/// tolerance are kept bit-for-bit.
pub fn validate_state(index: usize, m: ComplexMatrix) -> Result<HermitianOperator> {
    let reject = |reason: String| Error::Validation { index, reason };
    if m.dim() != 4 {
        return Err(reject(format!("expected a 4x4 matrix, got {0}x{0}", m.dim())));
    }
    if m.entries().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(reject("non-finite entry".into()));
    }
    let deviation = m.max_abs_diff(&m.adjoint());
    if deviation > EXPERIMENT_TOL {
        return Err(reject(format!("not Hermitian (deviation {deviation:.3e})")));
    }
    let rho = HermitianOperator::hermitize(&m);
    let trace = rho.trace();
    if (trace - 1.0).abs() > EXPERIMENT_TOL {
        return Err(reject(format!("trace {trace} outside 1 ± {EXPERIMENT_TOL:e}")));
    }
    let eig = eig_hermitian(&rho)?;
    let min = eig.min_eigenvalue();
    if min < -EXPERIMENT_TOL {
        return Err(reject(format!("eigenvalue {min:.3e} below -{EXPERIMENT_TOL:e}")));
    }
    if min >= -PSD_CLAMP && (trace - 1.0).abs() <= PSD_CLAMP {
        return Ok(rho);
    }
    let clamped = eig.map_spectrum(|l| l.max(0.0));
    let t = clamped.trace();
    Ok(clamped.scale(1.0 / t))
}

fn parse_json(text: &str) -> Result<ExperimentEnsemble> {
    let file: EnsembleFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        record: e.line(),
        message: e.to_string(),
    })?;
    let mut ens = ExperimentEnsemble::default();
    for (index, rec) in file.states.into_iter().enumerate() {
        let rows = rec.matrix.len();
        if rows != 4 || rec.matrix.iter().any(|r| r.len() != 4) {
            return Err(Error::Parse {
                record: index,
                message: "matrix must be 4x4 of [re, im] pairs".into(),
            });
        }
        let entries = rec
            .matrix
            .iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        let m = ComplexMatrix::from_rows(4, entries)?;
        ens.states.push(validate_state(index, m)?);
        ens.sources.push(if rec.label.is_empty() {
            format!("state {index}")
        } else {
            rec.label
        });
    }
    Ok(ens)
}

fn parse_csv(text: &str) -> Result<ExperimentEnsemble> {
    let mut ens = ExperimentEnsemble::default();
    let mut seen_data = false;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if !seen_data => {
                seen_data = true;
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    record: line_no + 1,
                    message: e.to_string(),
                })
            }
        };
        seen_data = true;
        if values.len() != 32 {
            return Err(Error::Parse {
                record: line_no + 1,
                message: format!("expected 32 numbers, found {}", values.len()),
            });
        }
        let entries = values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let index = ens.states.len();
        ens.states
            .push(validate_state(index, ComplexMatrix::from_rows(4, entries)?)?);
        ens.sources.push(format!("line {}", line_no + 1));
    }
    Ok(ens)
}

pub fn parse_ensemble(text: &str, format: EnsembleFormat) -> Result<ExperimentEnsemble> {
    match format {
        EnsembleFormat::Json => parse_json(text),
        EnsembleFormat::Csv => parse_csv(text),
    }
}

pub fn load_ensemble(path: &Path, format: EnsembleFormat) -> Result<ExperimentEnsemble> {
    parse_ensemble(&std::fs::read_to_string(path)?, format)
}

pub fn render_ensemble(ensemble: &ExperimentEnsemble, format: EnsembleFormat) -> Result<String> {
    match format {
        EnsembleFormat::Json => {
            let states = ensemble
                .states
                .iter()
                .enumerate()
                .map(|(i, rho)| StateRecord {
                    label: ensemble.sources.get(i).cloned().unwrap_or_default(),
                    matrix: (0..4)
                        .map(|r| (0..4).map(|c| [rho[(r, c)].re, rho[(r, c)].im]).collect())
                        .collect(),
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&EnsembleFile { states })?;
            text.push('\n');
            Ok(text)
        }
        EnsembleFormat::Csv => {
            let mut text = String::new();
            let header: Vec<String> = (0..16)
                .flat_map(|k| [format!("re{}{}", k / 4, k % 4), format!("im{}{}", k / 4, k % 4)])
                .collect();
            text.push_str(&header.join(","));
            text.push('\n');
            for rho in &ensemble.states {
                let row: Vec<String> = rho
                    .matrix()
                    .entries()
                    .iter()
                    .flat_map(|z| [format!("{:?}", z.re), format!("{:?}", z.im)])
                    .collect();
                let _ = writeln!(text, "{}", row.join(","));
            }
            Ok(text)
        }
    }
}

pub fn save_ensemble(path: &Path, ensemble: &ExperimentEnsemble, format: EnsembleFormat) -> Result<()> {
    std::fs::write(path, render_ensemble(ensemble, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{bell_state, BellLabel};
    use crate::random::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_bell_state() {
        let text = r#"{"states": [{"label": "ideal", "matrix": [
            [[0.5,0],[0,0],[0,0],[0.5,0]],
            [[0,0],[0,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[0,0]],
            [[0.5,0],[0,0],[0,0],[0.5,0]]]}]}"#;
        let ens = parse_ensemble(text, EnsembleFormat::Json).unwrap();
        assert_eq!(ens.len(), 1);
        assert_eq!(ens.sources, vec!["ideal"]);
        assert!(ens.states[0].max_abs_diff(&bell_state(BellLabel::PhiPlus)) < 1e-15);
    }

    #[test]
    fn bad_trace_reports_index() {
        let ok = HermitianOperator::identity(4).scale(0.25);
        let bad = HermitianOperator::identity(4).scale(0.225);
        let text = render_ensemble(&ExperimentEnsemble::from_states(vec![ok, bad]), EnsembleFormat::Json).unwrap();
        match parse_ensemble(&text, EnsembleFormat::Json) {
            Err(Error::Validation { index, reason }) => {
                assert_eq!(index, 1);
                assert!(reason.contains("trace"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let states: Vec<_> = (0..20).map(|_| random_density(&mut rng)).collect();
        let ens = ExperimentEnsemble::from_states(states);
        let back = parse_ensemble(
            &render_ensemble(&ens, EnsembleFormat::Json).unwrap(),
            EnsembleFormat::Json,
        )
        .unwrap();
        for (a, b) in ens.states.iter().zip(&back.states) {
            for (x, y) in a.matrix().entries().iter().zip(b.matrix().entries()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        assert_eq!(back.sources, ens.sources);
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states: Vec<_> = (0..5).map(|_| random_density(&mut rng)).collect();
        let ens = ExperimentEnsemble::from_states(states);
        let text = render_ensemble(&ens, EnsembleFormat::Csv).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 32);
        let back = parse_ensemble(&text, EnsembleFormat::Csv).unwrap();
        for (a, b) in ens.states.iter().zip(&back.states) {
            assert_eq!(a.max_abs_diff(b), 0.0);
        }
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let short = "# comment\n1,2,3\n";
        assert!(matches!(
            parse_ensemble(short, EnsembleFormat::Csv),
            Err(Error::Parse { record: 2, .. })
        ));
        let mut row = vec!["0"; 32];
        row[0] = "0.25";
        row[10] = "0.25";
        row[20] = "0.25";
        row[30] = "0.25";
        let good = row.join(",");
        let text = format!("{good}\n{good},x\n");
        assert!(matches!(
            parse_ensemble(&text, EnsembleFormat::Csv),
            Err(Error::Parse { record: 2, .. })
        ));
        assert_eq!(
            parse_ensemble(&format!("{good}\n"), EnsembleFormat::Csv).unwrap().len(),
            1
        );
    }

    #[test]
    fn slightly_negative_states_are_clamped() {
        // eigenvalues (0.5000002, 0.5, 0, -2e-7): inside the experimental window
        let m = ComplexMatrix::from_real_diagonal(&[0.5000002, 0.5, 0.0, -2e-7]);
        let rho = validate_state(0, m).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!(eig_hermitian(&rho).unwrap().min_eigenvalue() >= 0.0);
        let far = ComplexMatrix::from_real_diagonal(&[0.5001, 0.5, 0.0, -1e-4]);
        assert!(matches!(
            validate_state(3, far),
            Err(Error::Validation { index: 3, .. })
        ));
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = ComplexMatrix::from_real_diagonal(&[0.25; 4]);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(validate_state(0, m), Err(Error::Validation { index: 0, .. })));
    }
}
