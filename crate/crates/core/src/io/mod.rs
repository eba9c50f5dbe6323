//! Run configuration, ensemble files, and the generation/comparison pipeline.

pub mod config;
pub mod ensemble;
pub mod pipeline;

pub use config::{
    BaselineSpec, ConstraintName, HamiltonianSpec, RunConfig, SigmaSpec, TargetDist, DEFAULT_BELL_COEFFICIENTS,
    OUT_DIR_ENV,
};
pub use ensemble::{
    load_ensemble, parse_ensemble, render_ensemble, save_ensemble, validate_state, EnsembleFormat, ExperimentEnsemble,
    EXPERIMENT_TOL,
};
pub use pipeline::{
    compare_to_experiment, comparison_config, correlation_csv, fit_targets, fit_targets_against, run_cases, simulate,
    write_outputs, ComparisonResult, FittedTargets, Overlap, SimulationResult, SAMPLES_HEADER,
};
