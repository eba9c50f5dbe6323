//! Acceptance criteria. Each criterion prints one PASS/FAIL line followed by
//! a summary. Set `QPERTURB_ACCEPTANCE_STRICT=1` to exit non-zero when any
//! criterion fails.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use qperturb::io::BaselineSpec;
use qperturb::io::{compare_to_experiment, run_cases, simulate, ExperimentEnsemble, RunConfig, TargetDist};
use qperturb::linalg::{anticommutator, matrix_sqrt_psd, HermitianOperator};
use qperturb::measures::{chsh_max, concurrence, mutual_information};
use qperturb::pauli::{
    bell_diagonal_state, bell_state, pauli_project, BellDiagonalSpec, BellLabel, TwoQubitHamiltonian,
};
use qperturb::perturb::{
    analytic_unit_trace, analytic_unit_trace_eta, constraint_gradient, constraint_value, sample_gamma_epsilon,
    von_neumann_entropy, Baseline, ConstraintKind, ConstraintSet, Engine, PerturbationConfig, StudyCase,
};
use qperturb::random::{random_density, random_hermitian};
use qperturb::stats::{analytic_unit_trace_correlation, chi_reference, ks_test, mean, pearson_matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const REFERENCE_C: [f64; 4] = [1.0, 0.996, 0.4, -0.4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn reference_baseline() -> Baseline {
    Baseline::from_bell_diagonal(&BellDiagonalSpec::from_coefficients(REFERENCE_C).unwrap()).unwrap()
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn constraint_satisfaction() -> Outcome {
    let baseline = reference_baseline();
    let h = TwoQubitHamiltonian::device_default();
    let e0 = baseline.rho0.trace_product(&h.operator);
    let s0 = von_neumann_entropy(&baseline.rho0).unwrap();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut retained = 0;
    let mut attempts = 0;
    for case in [StudyCase::TraceEnergy, StudyCase::TraceEntropy, StudyCase::All] {
        let set = case.baseline_constraints(&baseline.rho0, &h).unwrap();
        let engine = Engine::new(baseline.clone(), set, PerturbationConfig::uniform(0.05, 101, 1000)).unwrap();
        let ens = single_thread(|| engine.generate()).unwrap();
        retained += ens.samples.len();
        attempts += ens.attempts;
        for s in &ens.samples {
            let rho = &s.rho_r;
            worst = worst.max((rho.trace() - 1.0).abs());
            if case.has_energy() {
                worst = worst.max((rho.trace_product(&h.operator) - e0).abs());
            }
            if case.has_entropy() {
                worst = worst.max((von_neumann_entropy(rho).unwrap() - s0).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        retained == 3000 && worst <= 1e-8 && secs <= 60.0,
        format!("{retained} samples from {attempts} attempts, max residual {worst:.2e}, {secs:.1} s on one thread"),
    )
}

fn analytic_oracle() -> Outcome {
    let baseline = reference_baseline();
    let engine = Engine::new(
        baseline.clone(),
        ConstraintSet::unit_trace_only(),
        PerturbationConfig::uniform(0.05, 202, 1000),
    )
    .unwrap();
    let ens = engine.generate().unwrap();
    let mut worst = 0.0f64;
    for s in &ens.samples {
        let (gamma, lambda) = analytic_unit_trace(&s.gamma_eps);
        worst = worst.max(s.gamma_r.max_abs_diff(&gamma));
        worst = worst.max((s.lambdas[0] - lambda).abs());
        let numeric = pauli_project(&s.gamma_r).unwrap().to_flat();
        let closed = analytic_unit_trace_eta(&baseline.eta0, &s.eta_raw).to_flat();
        for (a, b) in numeric.iter().zip(closed) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        ens.samples.len() == 1000 && worst <= 1e-10,
        format!("1000 samples, max deviation {worst:.2e}"),
    )
}

fn chi_statistics() -> Outcome {
    let baseline = reference_baseline();
    let sigma = 0.05;
    let cfg = PerturbationConfig::uniform(sigma, 303, 5000);
    let raw: Vec<f64> = (0..5000)
        .map(|i| sample_gamma_epsilon(&baseline.gamma0, &cfg, i).1.norm() / sigma)
        .collect();
    let chi = chi_reference(16, 1.0).unwrap();
    let raw_mean = mean(&raw);
    let raw_ks = ks_test(&raw, |x| chi.cdf(x)).unwrap();

    let engine = Engine::new(baseline.clone(), ConstraintSet::unit_trace_only(), cfg).unwrap();
    let constrained: Vec<f64> = engine
        .generate()
        .unwrap()
        .samples
        .iter()
        .map(|s| s.eta_constrained.norm() / sigma)
        .collect();
    let con_ks = ks_test(&constrained, |x| chi.cdf(x)).unwrap();
    outcome(
        (raw_mean - 3.94).abs() <= 0.05 && raw_ks.passes(0.01) && !con_ks.passes(0.01),
        format!(
            "raw mean {raw_mean:.4}, raw KS p = {:.3}, constrained mean {:.4}, constrained KS p = {:.2e}",
            raw_ks.p_value,
            mean(&constrained),
            con_ks.p_value
        ),
    )
}

fn correlation_reproduction() -> Outcome {
    let baseline = reference_baseline();
    let analytic = analytic_unit_trace_correlation(&baseline.eta0).unwrap();
    let engine = Engine::new(
        baseline,
        ConstraintSet::unit_trace_only(),
        PerturbationConfig::uniform(0.05, 404, 5000),
    )
    .unwrap();
    let etas: Vec<_> = engine
        .generate()
        .unwrap()
        .samples
        .iter()
        .map(|s| s.eta_constrained)
        .collect();
    let empirical = pearson_matrix(&etas).unwrap();
    let published = [
        ((1, 1), (0, 0), -0.9191),
        ((2, 2), (0, 0), -0.1530),
        ((3, 3), (0, 0), 0.1530),
        ((2, 2), (1, 1), -0.1283),
        ((3, 3), (1, 1), 0.1283),
        ((3, 3), (2, 2), 0.0214),
    ];
    let mut worst_analytic = 0.0f64;
    let mut worst_empirical = 0.0f64;
    let mut offsets = Vec::new();
    for (ij, kl, value) in published {
        worst_analytic = worst_analytic.max((analytic.pair(ij, kl) - value).abs());
        let offset = empirical.pair(ij, kl) - value;
        worst_empirical = worst_empirical.max(offset.abs());
        offsets.push(format!("{offset:+.3}"));
    }
    outcome(
        worst_analytic <= 1e-4 && worst_empirical <= 0.03,
        format!(
            "analytic max error {worst_analytic:.1e}; empirical (N = 5000) offsets [{}]",
            offsets.join(", ")
        ),
    )
}

fn ensemble_summary() -> Outcome {
    let mut cfg = RunConfig::study_case(StudyCase::Trace, 505, 0.05, 1000);
    cfg.out_dir = tempfile::tempdir().unwrap().keep();
    let result = run_cases(&cfg).unwrap();
    let theta = mean(&result.column("theta"));
    let fidelity = mean(&result.column("fidelity"));
    let fidelity_sq = mean(&result.column("fidelity").iter().map(|f| f * f).collect::<Vec<_>>());
    let _ = std::fs::remove_dir_all(&cfg.out_dir);
    let theta_ok = (theta - 0.18).abs() <= 0.02;
    let fidelity_ok = (fidelity - 0.98).abs() <= 0.005;
    outcome(
        theta_ok && fidelity_ok,
        format!(
            "theta mean {theta:.4} ({}), fidelity mean {fidelity:.4} ({}); squared fidelity mean {fidelity_sq:.4}",
            if theta_ok { "ok" } else { "out of range" },
            if fidelity_ok { "ok" } else { "out of range" },
        ),
    )
}

fn exact_anchors() -> Outcome {
    let phi = bell_state(BellLabel::PhiPlus);
    let mixed = HermitianOperator::identity(4).scale(0.25);
    let errors = [
        (concurrence(&phi).unwrap() - 1.0).abs(),
        (chsh_max(&phi).unwrap() - 2.0 * SQRT_2).abs(),
        (mutual_information(&phi).unwrap() - 2.0 * LN_2).abs(),
        concurrence(&mixed).unwrap().abs(),
        chsh_max(&mixed).unwrap().abs(),
        mutual_information(&mixed).unwrap().abs(),
    ];
    let worst = errors.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-10, format!("max error {worst:.1e}"))
}

fn derived_anchors() -> Outcome {
    let (rho, _) = bell_diagonal_state(REFERENCE_C).unwrap();
    let checks = [
        ("entropy", von_neumann_entropy(&rho).unwrap(), 0.625_116_781_716_888_4),
        (
            "mutual information",
            mutual_information(&rho).unwrap(),
            0.761_177_579_403_002_1,
        ),
        ("concurrence", concurrence(&rho).unwrap(), 0.398),
        ("chsh_max", chsh_max(&rho).unwrap(), 2.146_640_165_467_887_5),
    ];
    let worst = checks
        .iter()
        .map(|(_, got, want)| (got - want).abs())
        .fold(0.0, f64::max);
    let listing: Vec<String> = checks.iter().map(|(n, got, _)| format!("{n} {got:.6}")).collect();
    outcome(worst <= 1e-9, format!("{}; max error {worst:.1e}", listing.join(", ")))
}

fn gradient_correctness() -> Outcome {
    let h = TwoQubitHamiltonian::device_default();
    let kinds = [
        ConstraintKind::UnitTrace,
        ConstraintKind::Energy(h),
        ConstraintKind::Entropy,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let gamma = matrix_sqrt_psd(&random_density(&mut rng)).unwrap();
        let delta = random_hermitian(&mut rng, 4);
        for kind in &kinds {
            let g = constraint_gradient(kind, &gamma).unwrap();
            let analytic = anticommutator(&g, &gamma).unwrap().trace_product(&delta);
            let step = 1e-5;
            let f = |t: f64| constraint_value(&gamma.add_scaled(&delta, t).square(), kind).unwrap();
            let numeric = (f(step) - f(-step)) / (2.0 * step);
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-6, format!("300 checks, max relative error {worst:.1e}"))
}

fn device_scenario(case: StudyCase, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::study_case(case, seed, 0.05, 1000);
    cfg.baseline = BaselineSpec::PureBell { label: "phi+".into() };
    if case.has_energy() {
        cfg.energy_dist = Some(TargetDist {
            mean: -0.3,
            stddev: 0.1,
        });
    }
    if case.has_entropy() {
        cfg.entropy_dist = Some(TargetDist {
            mean: 0.55,
            stddev: 0.05,
        });
    }
    cfg
}

fn qualitative_device() -> Outcome {
    let case4 = simulate(&device_scenario(StudyCase::All, 909)).unwrap();
    let case2 = simulate(&device_scenario(StudyCase::TraceEnergy, 909)).unwrap();
    let target = Normal::new(0.55, 0.05).unwrap();
    let ks = ks_test(&case4.column("entropy"), |x| target.cdf(x)).unwrap();
    let norm4 = case4.constrained_correlation().unwrap().off_diagonal_norm();
    let norm2 = case2.constrained_correlation().unwrap().off_diagonal_norm();

    // self-comparison: a Case 4 ensemble stands in for the experiment
    let experiment = ExperimentEnsemble::from_states(case4.ensemble.samples.iter().map(|s| s.rho_r.clone()).collect());
    let mut cfg = device_scenario(StudyCase::All, 910);
    cfg.energy_dist = None;
    cfg.entropy_dist = None;
    let dir = tempfile::tempdir().unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    let cmp = compare_to_experiment(&cfg, &experiment).unwrap();
    let n = experiment.len() as f64;
    let worst_z = cmp
        .overlap
        .iter()
        .filter(|o| o.experiment_std > 0.0)
        .map(|o| o.mean_difference.abs() / ((o.experiment_std.powi(2) + o.simulated_std.powi(2)) / n).sqrt())
        .fold(0.0, f64::max);

    outcome(
        ks.passes(0.01) && norm4 > norm2 && worst_z <= 5.0,
        format!(
            "entropy KS p = {:.3}; off-diagonal norm case 4 {norm4:.3} vs case 2 {norm2:.3}; \
             self-comparison max |mean difference| = {worst_z:.2} standard errors",
            ks.p_value
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).unwrap(),
        );
    }
    files
}

fn determinism() -> Outcome {
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::study_case(StudyCase::All, 1010, 0.05, 300);
        cfg.out_dir = dir.path().to_path_buf();
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_cases(&cfg))
            .unwrap();
        read_tree(dir.path())
    };
    let first = run(1);
    let second = run(4);
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    outcome(
        !first.is_empty() && first.len() == second.len() && differing.is_empty(),
        format!(
            "{} files compared across 1 and 4 threads, {} differ",
            first.len(),
            differing.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("constraint satisfaction, cases 2-4", constraint_satisfaction),
        ("unit-trace analytic oracle", analytic_oracle),
        ("chi statistics", chi_statistics),
        ("analytic correlation reproduction", correlation_reproduction),
        ("case 1 ensemble summary", ensemble_summary),
        ("exact measure anchors", exact_anchors),
        ("derived measure anchors", derived_anchors),
        ("gradient correctness", gradient_correctness),
        ("device-style case 4 behaviour", qualitative_device),
        ("determinism", determinism),
    ];

    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            n + 1,
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    let strict = std::env::var("QPERTURB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
