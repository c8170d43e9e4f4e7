//! Property suite, experiment configs and report writers.
//!
//! Every identity the engine is supposed to satisfy is a named [`Check`]
//! run over seeded random instances. A [`SuiteReport`] records the worst
//! instance of each check together with the inputs that replay it.
//! Experiments are JSON documents ([`ExperimentConfig`]) validated into a
//! [`Plan`] and run by [`run_experiment`], which writes CSV tables and JSON
//! reports that depend on nothing but the config.

mod config;
mod experiment;
mod generators;
mod report;
mod suite;

pub use config::{
    Budgets, Experiment, ExperimentConfig, ExperimentKind, GridSpec, MarketSpec, OutputSpec, Overrides, Plan, SpaceSpec,
    SuiteSpec, PATH_BUDGET, WORK_BUDGET,
};
pub use experiment::{
    convergence_comparisons, convergence_csv, execute, gamma_constants, l1_csv, run_experiment, Artifact, ExperimentOutput,
    CONVERGENCE_CSV_HEADER, DELTA_TOL, EXACT_TOL, L1_CSV_HEADER, SLOPE_BAND,
};
pub use generators::{Gen, Sizes};
pub use report::{fmt, CheckRecord, Fingerprint, Replay, SuiteReport, Summary, REPORT_SCHEMA, SUITE_CSV_HEADER};
pub use suite::{checks, replay, run_property_suite, run_property_suite_filtered, Check, Kind, Mutation, Profile};

#[cfg(test)]
mod tests;
