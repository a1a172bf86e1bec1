//! Experiment orchestration: seed/algorithm fan-out, streaming CSV output,
//! checkpointing, and the cross-seed summary.
//!
//! Each (algorithm, seed) pair is an independent worker with its own
//! posterior, random source, and output file, so workers run in parallel and
//! the summary is a sequential reduce at the end. Per-episode rows are
//! flushed in batches and learner state is checkpointed at every batch
//! boundary, which makes long runs resumable.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::baselines::safe_follow_policy;
use crate::harness::config::{AlgorithmConfig, ExperimentConfig};
use crate::harness::regret::{write_csv_header, write_csv_row, RegretAccountant, RegretLedger};
use crate::model::TabularCmdp;
use crate::planning::{evaluate_policy, Signal};
use crate::posterior::DirichletPosterior;
use crate::safe_psrl::{SafePsrlRun, ScheduleConfig};
use crate::seeding::episode_rng;

/// Strategies the harness can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    SafePsrl,
    UnconstrainedPsrl,
    SafeFollow,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SafePsrl => "safe_psrl",
            Algorithm::UnconstrainedPsrl => "unconstrained_psrl",
            Algorithm::SafeFollow => "safe_follow",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "safe_psrl" => Some(Algorithm::SafePsrl),
            "unconstrained_psrl" => Some(Algorithm::UnconstrainedPsrl),
            "safe_follow" => Some(Algorithm::SafeFollow),
            _ => None,
        }
    }
}

/// Scalar diagnostics of one run, alongside its ledger.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub max_lambda: f64,
    /// Dual variable after the final episode.
    pub final_lambda: f64,
    pub final_epsilon: f64,
    pub final_eta: f64,
    /// Episodes whose tightened budget was unachievable under the sampled
    /// kernel.
    pub pessimistic_infeasible: usize,
    /// Max over episodes of |lambda_{k+1} - lambda_k| - (H + eps_k);
    /// nonpositive when every dual step respected its bound.
    pub max_dual_increment_excess: f64,
}

/// Drift bound on the dual variable at episode `k`:
/// `4 (H^2 + eps_k^2 + eta_k H) / (tau - c0) + H`.
pub fn dual_drift_bound(config: &ScheduleConfig, k: usize) -> f64 {
    let h = config.horizon as f64;
    let eps = config.epsilon(k);
    let eta = config.eta(k);
    4.0 * (h * h + eps * eps + eta * h) / (config.tau - config.c0) + h
}

/// Run one algorithm for `episodes` episodes against `model` as ground
/// truth, returning the exact regret ledger and run diagnostics.
pub fn run_ledger(
    model: &TabularCmdp,
    algorithm: Algorithm,
    algo: &AlgorithmConfig,
    episodes: usize,
    seed: u64,
) -> Result<(RegretLedger, RunStats)> {
    let accountant = RegretAccountant::new(model)?;
    let mut ledger = RegretLedger::new(seed, String::new());
    let mut stats = RunStats::default();
    match algorithm {
        Algorithm::SafePsrl | Algorithm::UnconstrainedPsrl => {
            let config = ScheduleConfig::for_model(model, algo.c0, algo.epsilon_scale)?;
            let prior =
                DirichletPosterior::new(model.num_states(), model.num_actions(), algo.prior_alpha)?;
            let mut runner = match algorithm {
                Algorithm::SafePsrl => SafePsrlRun::new(model, prior, config, seed)?,
                _ => SafePsrlRun::unconstrained(model, prior, config, seed)?,
            };
            for _ in 0..episodes {
                let record = runner.step();
                accountant.account(&record, &mut ledger)?;
                fold_stats(&mut stats, &record, model.horizon());
            }
        }
        Algorithm::SafeFollow => {
            let policy = safe_follow_policy(model, algo.c0)?;
            let s1 = model.initial_state();
            let planned_cost = evaluate_policy(&policy, model, Signal::Cost)?.episode_value(s1);
            if planned_cost > algo.c0 + 1e-9 {
                return Err(Error::Infeasible(format!(
                    "safe policy costs {planned_cost}, above its claimed level {}",
                    algo.c0
                )));
            }
            let (reward_gap, constraint_gap) = accountant.gaps(&policy)?;
            for _ in 0..episodes {
                ledger.push(reward_gap, constraint_gap, 0.0, 0.0, planned_cost);
            }
        }
    }
    Ok((ledger, stats))
}

fn fold_stats(stats: &mut RunStats, record: &crate::safe_psrl::EpisodeRecord, horizon: usize) {
    stats.max_lambda = stats
        .max_lambda
        .max(record.lambda_after)
        .max(record.lambda_before);
    stats.final_lambda = record.lambda_after;
    stats.final_epsilon = record.epsilon;
    stats.final_eta = record.eta;
    if !record.pessimistic_feasible {
        stats.pessimistic_infeasible += 1;
    }
    let increment = (record.lambda_after - record.lambda_before).abs();
    let excess = increment - (horizon as f64 + record.epsilon);
    stats.max_dual_increment_excess = stats.max_dual_increment_excess.max(excess);
}

/// Files produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub out_dir: PathBuf,
    pub ledger_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
    /// How many tasks continued from an on-disk checkpoint.
    pub resumed_tasks: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    algorithm: String,
    seed: u64,
    config_hash: String,
    /// Next episode the run would execute, 1-based.
    next_episode: usize,
    lambda: f64,
    stats: RunStats,
    posterior: serde_json::Value,
}

struct TaskResult {
    algorithm: Algorithm,
    seed: u64,
    csv_path: PathBuf,
    episodes: usize,
    final_cum_reward: f64,
    final_cum_constraint: f64,
    stats: RunStats,
    resumed: bool,
}

/// Execute the configured experiment: every enabled algorithm on every seed,
/// in parallel, then a summary CSV aggregating mean and standard error of
/// the final cumulative regrets across seeds.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_override: Option<&Path>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let out_dir = config.resolve_output_dir(out_override);
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let checkpoint_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&checkpoint_dir).map_err(|e| Error::io(&checkpoint_dir, e))?;

    let env_model = crate::envs::make_media_streaming(&config.environment)?;
    let mut algorithms = vec![Algorithm::SafePsrl];
    if config.experiment.baselines.unconstrained_psrl {
        algorithms.push(Algorithm::UnconstrainedPsrl);
    }
    if config.experiment.baselines.safe_follow {
        algorithms.push(Algorithm::SafeFollow);
    }

    let tasks: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| config.experiment.seeds.iter().map(move |&s| (a, s)))
        .collect();

    let mut results = tasks
        .par_iter()
        .map(|&(algorithm, seed)| {
            execute_task(
                config,
                &env_model,
                algorithm,
                seed,
                &out_dir,
                &checkpoint_dir,
            )
        })
        .collect::<Result<Vec<TaskResult>>>()?;
    results.sort_by(|a, b| (a.algorithm.name(), a.seed).cmp(&(b.algorithm.name(), b.seed)));

    let summary_file = out_dir.join("summary.csv");
    write_summary(&summary_file, config, &results)?;

    Ok(ExperimentOutput {
        out_dir,
        resumed_tasks: results.iter().filter(|r| r.resumed).count(),
        ledger_files: results.into_iter().map(|r| r.csv_path).collect(),
        summary_file,
    })
}

/// Ground truth for one seed: the fixed environment kernel, or a kernel
/// drawn from the prior when the config asks for prior-matched evaluation.
fn ground_truth(
    config: &ExperimentConfig,
    env_model: &TabularCmdp,
    seed: u64,
) -> Result<TabularCmdp> {
    if !config.experiment.truth_from_prior {
        return Ok(env_model.clone());
    }
    let prior = DirichletPosterior::new(
        env_model.num_states(),
        env_model.num_actions(),
        config.algorithm.prior_alpha,
    )?;
    // Episode 0 is never used by runs, so it is free for the truth draw.
    let mut rng = episode_rng(seed, 0);
    let kernel = prior.sample(&mut rng).into_transitions();
    env_model.with_transitions(kernel)
}

fn execute_task(
    config: &ExperimentConfig,
    env_model: &TabularCmdp,
    algorithm: Algorithm,
    seed: u64,
    out_dir: &Path,
    checkpoint_dir: &Path,
) -> Result<TaskResult> {
    let truth = ground_truth(config, env_model, seed)?;
    let episodes = config.experiment.episodes;
    let batch = config.experiment.checkpoint_every;
    let hash = config.semantic_hash();
    let csv_path = out_dir.join(format!("{}_seed{}.csv", algorithm.name(), seed));
    let checkpoint_path = checkpoint_dir.join(format!("{}_seed{}.json", algorithm.name(), seed));

    let accountant = RegretAccountant::new(&truth)?;
    let mut ledger = RegretLedger::new(seed, hash.clone());
    let mut stats = RunStats::default();
    let mut resumed = false;

    match algorithm {
        Algorithm::SafeFollow => {
            let policy = safe_follow_policy(&truth, config.algorithm.c0)?;
            let planned_cost = evaluate_policy(&policy, &truth, Signal::Cost)?
                .episode_value(truth.initial_state());
            let (reward_gap, constraint_gap) = accountant.gaps(&policy)?;
            let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            let mut w = BufWriter::new(file);
            write_csv_header(&mut w, &csv_path)?;
            for k in 1..=episodes {
                ledger.push(reward_gap, constraint_gap, 0.0, 0.0, planned_cost);
                write_csv_row(&mut w, &csv_path, k, &ledger, k - 1)?;
            }
            w.flush().map_err(|e| Error::io(&csv_path, e))?;
        }
        Algorithm::SafePsrl | Algorithm::UnconstrainedPsrl => {
            let schedule = ScheduleConfig::for_model(
                &truth,
                config.algorithm.c0,
                config.algorithm.epsilon_scale,
            )?;
            let dual_enabled = algorithm == Algorithm::SafePsrl;

            let mut runner: Option<SafePsrlRun> = None;
            if config.experiment.resume {
                if let Some((restored_runner, restored_ledger, restored_stats)) = try_resume(
                    &truth,
                    &schedule,
                    algorithm,
                    seed,
                    &hash,
                    &checkpoint_path,
                    &csv_path,
                    dual_enabled,
                    episodes,
                )? {
                    ledger = restored_ledger;
                    stats = restored_stats;
                    resumed = true;
                    runner = Some(restored_runner);
                }
            }
            let mut runner = match runner {
                Some(r) => r,
                None => {
                    ledger = RegretLedger::new(seed, hash.clone());
                    stats = RunStats::default();
                    let prior = DirichletPosterior::new(
                        truth.num_states(),
                        truth.num_actions(),
                        config.algorithm.prior_alpha,
                    )?;
                    if dual_enabled {
                        SafePsrlRun::new(&truth, prior, schedule.clone(), seed)?
                    } else {
                        SafePsrlRun::unconstrained(&truth, prior, schedule.clone(), seed)?
                    }
                }
            };

            let file = if ledger.is_empty() {
                File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?
            } else {
                fs::OpenOptions::new()
                    .append(true)
                    .open(&csv_path)
                    .map_err(|e| Error::io(&csv_path, e))?
            };
            let mut w = BufWriter::new(file);
            if ledger.is_empty() {
                write_csv_header(&mut w, &csv_path)?;
            }

            while ledger.len() < episodes {
                let target = (ledger.len() + batch).min(episodes);
                while ledger.len() < target {
                    let record = runner.step();
                    accountant.account(&record, &mut ledger)?;
                    fold_stats(&mut stats, &record, truth.horizon());
                    write_csv_row(&mut w, &csv_path, ledger.len(), &ledger, ledger.len() - 1)?;
                }
                w.flush().map_err(|e| Error::io(&csv_path, e))?;
                write_checkpoint(&checkpoint_path, algorithm, seed, &hash, &runner, &stats)?;
            }
            w.flush().map_err(|e| Error::io(&csv_path, e))?;
        }
    }

    Ok(TaskResult {
        algorithm,
        seed,
        csv_path,
        episodes,
        final_cum_reward: ledger.cum_reward.last().copied().unwrap_or(0.0),
        final_cum_constraint: ledger.cum_constraint.last().copied().unwrap_or(0.0),
        stats,
        resumed,
    })
}

fn write_checkpoint(
    path: &Path,
    algorithm: Algorithm,
    seed: u64,
    hash: &str,
    runner: &SafePsrlRun,
    stats: &RunStats,
) -> Result<()> {
    let doc = CheckpointDoc {
        algorithm: algorithm.name().to_string(),
        seed,
        config_hash: hash.to_string(),
        next_episode: runner.episode(),
        lambda: runner.dual().lambda,
        stats: *stats,
        posterior: serde_json::from_str(&runner.posterior().to_json()?)?,
    };
    fs::write(path, serde_json::to_string(&doc)?).map_err(|e| Error::io(path, e))
}

/// Restore a learner from its checkpoint when one exists and matches this
/// task. The CSV is trimmed back to the checkpointed episode so the two
/// stay aligned; on any inconsistency the run restarts from scratch.
#[allow(clippy::too_many_arguments)]
fn try_resume<'a>(
    truth: &'a TabularCmdp,
    schedule: &ScheduleConfig,
    algorithm: Algorithm,
    seed: u64,
    hash: &str,
    checkpoint_path: &Path,
    csv_path: &Path,
    dual_enabled: bool,
    episodes: usize,
) -> Result<Option<(SafePsrlRun<'a>, RegretLedger, RunStats)>> {
    if !checkpoint_path.exists() || !csv_path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(checkpoint_path).map_err(|e| Error::io(checkpoint_path, e))?;
    let doc: CheckpointDoc = match serde_json::from_str(&text) {
        Ok(doc) => doc,
        Err(_) => return Ok(None),
    };
    if doc.algorithm != algorithm.name()
        || doc.seed != seed
        || doc.config_hash != hash
        || doc.next_episode == 0
        || doc.next_episode > episodes + 1
    {
        return Ok(None);
    }
    let done = doc.next_episode - 1;
    let mut ledger = match RegretLedger::read_csv(csv_path, seed, hash.to_string()) {
        Ok(l) => l,
        Err(_) => return Ok(None),
    };
    if ledger.len() < done {
        return Ok(None);
    }
    if ledger.len() > done {
        ledger.reward_gaps.truncate(done);
        ledger.constraint_gaps.truncate(done);
        ledger.cum_reward.truncate(done);
        ledger.cum_constraint.truncate(done);
        ledger.lambdas.truncate(done);
        ledger.epsilons.truncate(done);
        ledger.planned_costs.truncate(done);
        ledger.write_csv(csv_path)?;
    }
    let posterior = DirichletPosterior::from_json(&doc.posterior.to_string())?;
    let runner = SafePsrlRun::restore(
        truth,
        posterior,
        schedule.clone(),
        seed,
        doc.next_episode,
        doc.lambda,
        dual_enabled,
    )?;
    Ok(Some((runner, ledger, doc.stats)))
}

fn write_summary(path: &Path, config: &ExperimentConfig, results: &[TaskResult]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "algorithm,seed,episodes,config_hash,final_cum_reward_regret,final_cum_constraint_regret,\
         max_lambda,final_lambda,final_epsilon,dual_drift_bound,pessimistic_infeasible_episodes"
    )
    .map_err(|e| Error::io(path, e))?;

    let hash = config.semantic_hash();
    let schedule_bound = ScheduleConfig::new(
        config.algorithm.c0,
        config.environment.threshold,
        config.algorithm.epsilon_scale,
        config.environment.horizon,
        config.environment.buffer_capacity + 1,
        2,
    )
    .map(|s| dual_drift_bound(&s, config.experiment.episodes))
    .unwrap_or(f64::NAN);

    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm.name(),
            r.seed,
            r.episodes,
            hash,
            r.final_cum_reward,
            r.final_cum_constraint,
            r.stats.max_lambda,
            r.stats.final_lambda,
            r.stats.final_epsilon,
            schedule_bound,
            r.stats.pessimistic_infeasible
        )
        .map_err(|e| Error::io(path, e))?;
    }

    // Aggregate rows: mean and standard error of the final regrets per
    // algorithm across seeds.
    let mut names: Vec<&'static str> = results.iter().map(|r| r.algorithm.name()).collect();
    names.dedup();
    for name in names {
        let group: Vec<&TaskResult> = results
            .iter()
            .filter(|r| r.algorithm.name() == name)
            .collect();
        let rewards: Vec<f64> = group.iter().map(|r| r.final_cum_reward).collect();
        let constraints: Vec<f64> = group.iter().map(|r| r.final_cum_constraint).collect();
        let episodes = group.first().map_or(0, |r| r.episodes);
        writeln!(
            w,
            "{name},mean,{episodes},{hash},{},{},,,,,",
            mean(&rewards),
            mean(&constraints)
        )
        .map_err(|e| Error::io(path, e))?;
        writeln!(
            w,
            "{name},stderr,{episodes},{hash},{},{},,,,,",
            stderr(&rewards),
            stderr(&constraints)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn stderr(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    (var / values.len() as f64).sqrt()
}
