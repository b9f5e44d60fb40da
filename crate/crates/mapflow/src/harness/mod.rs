//! Config-driven experiment harness: TOML experiment descriptions, the
//! runner that executes them and emits artifacts, refinement studies, and
//! suites.

pub mod config;
pub mod runner;

pub use config::{ExperimentConfig, ProfileKind};
pub use runner::{
    run_experiment, run_suite, refinement_study, report_json, ExperimentOutcome,
    ExperimentReport, RefinementReport, SuiteOutcome,
};
