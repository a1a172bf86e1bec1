//! Experiment harness: regret accounting, baselines, orchestration, and
//! configuration.

pub mod baselines;
pub mod config;
pub mod experiment;
pub mod regret;

pub use baselines::{baseline_safe_follow, baseline_unconstrained_psrl, safe_follow_policy};
pub use config::{AlgorithmConfig, BaselineToggles, ExperimentConfig, ExperimentSection};
pub use experiment::{
    dual_drift_bound, run_experiment, run_ledger, Algorithm, ExperimentOutput, RunStats,
};
pub use regret::{compute_regret, RegretAccountant, RegretLedger};
