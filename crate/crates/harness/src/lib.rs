//! Experiment runner and diagnostics around the exploration library:
//! Monte-Carlo replications, scaling studies in the episode budget, horizon
//! and dimension, confidence coverage, appendix-quantity diagnostics,
//! baselines and CSV emission.

pub mod csvio;
pub mod diagnostics;
pub mod evalrewards;
pub mod experiment;
pub mod stats;
pub mod tools;

pub use diagnostics::{
    coverage_holds, diagnostics_pass, measure_suboptimality, probe_monotonicity,
    verify_value_difference_identity, DiagnosticsReport,
};
pub use evalrewards::evaluation_rewards;
pub use experiment::{
    build_instance, run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutcome,
    InstanceSpec,
};
