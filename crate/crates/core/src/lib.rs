//! Tabular constrained-MDP laboratory: exact finite-horizon planning
//! oracles, a primal-dual posterior-sampling online learner, a queueing
//! benchmark environment, and a regret benchmarking harness with CSV and
//! SVG output.
//!
//! The pieces compose bottom-up:
//!
//! - [`model`]: the CMDP tuple and its validated table types.
//! - [`planning`]: policy evaluation, backward induction, occupancy
//!   measures.
//! - [`simplex`] / [`lp`]: the occupancy-measure LP for constrained optima.
//! - [`posterior`]: independent Dirichlet beliefs over the transition
//!   kernel with conjugate updates and seeded sampling.
//! - [`safe_psrl`]: the online learner (sample, plan a Lagrangian-greedy
//!   policy, roll out, ascend the dual).
//! - [`envs`]: the media-streaming buffer benchmark.
//! - [`harness`]: regret ledgers, baselines, multi-seed experiments.
//! - [`plot`]: SVG regret curves.
//!
//! Everything numerical is deterministic given a seed; see
//! [`seeding::episode_rng`] for the keying scheme.

pub mod envs;
pub mod error;
pub mod harness;
pub mod lp;
pub mod model;
pub mod planning;
pub mod plot;
pub mod posterior;
pub mod safe_psrl;
pub mod seeding;
pub mod simplex;

pub use error::{Error, Result};
pub use lp::{solve_constrained_lp, ConstrainedOutcome, ConstrainedSolution};
pub use model::{OccupancyMeasure, Policy, SignalTable, TabularCmdp, Transitions, ValueTable};
pub use planning::{evaluate_policy, policy_occupancy, solve_unconstrained, Signal};
pub use posterior::{DirichletPosterior, SampledKernel};
pub use safe_psrl::{DualState, EpisodeRecord, SafePsrlRun, ScheduleConfig};
