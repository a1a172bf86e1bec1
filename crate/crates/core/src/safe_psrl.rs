//! Primal-dual posterior-sampling learner for constrained episodic MDPs.
//!
//! Each episode k:
//!
//! 1. draws a kernel `p_hat` from the Dirichlet posterior,
//! 2. plans the deterministic policy maximizing the Lagrangian reward
//!    `r - (lambda_k / eta_k) c` under `p_hat` (primal update),
//! 3. rolls the policy out for H steps in the true environment, feeding
//!    every observed transition back into the posterior,
//! 4. ascends the dual variable by the pessimistically tightened violation
//!    of the planned cost: `lambda <- max(0, lambda + V(c, p_hat) + eps_k - tau)`.
//!
//! The schedules are the two design knobs. The tightening term shrinks as
//! `~ sqrt(log k / k)`,
//!
//! ```text
//!   eps_k = scale * 5 H^1.5 sqrt(|S|^2 |A|) (log(k |S| |A| H) + 1)
//!           / sqrt(k log(k |S| |A| H))        (natural log)
//! ```
//!
//! while the dual temperature grows as `eta_k = (tau - c0) H sqrt(k)`, so the
//! effective penalty `lambda_k / eta_k` cools off as evidence accumulates.
//! `c0` is a cost level known to be achievable by some policy, strictly below
//! the budget `tau`. Early episodes may see `eps_k > tau`; the dual simply
//! climbs until the tightening decays, and `scale` exists to tame that phase
//! in practice.
//!
//! A run is sequential (the posterior threads through time); independent
//! runs can execute in parallel.

use crate::error::{Error, Result};
use crate::model::{Policy, SignalTable, TabularCmdp, Transitions};
use crate::planning::{evaluate_policy_under, solve_unconstrained_under};
use crate::posterior::DirichletPosterior;
use crate::seeding::episode_rng;

/// Schedule parameters, validated once so evaluation is infallible.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub c0: f64,
    pub tau: f64,
    pub epsilon_scale: f64,
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
}

impl ScheduleConfig {
    pub fn new(
        c0: f64,
        tau: f64,
        epsilon_scale: f64,
        horizon: usize,
        num_states: usize,
        num_actions: usize,
    ) -> Result<Self> {
        if !(0.0 < c0 && c0 < tau && tau <= horizon as f64) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < c0 < tau <= horizon, got c0={c0}, tau={tau}, horizon={horizon}"
            )));
        }
        if !(epsilon_scale > 0.0 && epsilon_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon scale must be positive, got {epsilon_scale}"
            )));
        }
        if num_states * num_actions * horizon <= 1 {
            return Err(Error::InvalidConfig(
                "degenerate model: |S| * |A| * H must exceed 1 for the schedule logarithm".into(),
            ));
        }
        Ok(ScheduleConfig {
            c0,
            tau,
            epsilon_scale,
            horizon,
            num_states,
            num_actions,
        })
    }

    /// Config sized for `model` with the given satisfiable cost level.
    pub fn for_model(model: &TabularCmdp, c0: f64, epsilon_scale: f64) -> Result<Self> {
        ScheduleConfig::new(
            c0,
            model.threshold(),
            epsilon_scale,
            model.horizon(),
            model.num_states(),
            model.num_actions(),
        )
    }

    /// Pessimistic tightening of the budget at episode `k` (1-based).
    pub fn epsilon(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let h = self.horizon as f64;
        let s = self.num_states as f64;
        let a = self.num_actions as f64;
        let log_term = (k as f64 * s * a * h).ln();
        self.epsilon_scale * 5.0 * h.powf(1.5) * (s * s * a).sqrt() * (log_term + 1.0)
            / (k as f64 * log_term).sqrt()
    }

    /// Dual temperature at episode `k` (1-based).
    pub fn eta(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        (self.tau - self.c0) * self.horizon as f64 * (k as f64).sqrt()
    }
}

/// Dual variable plus the schedule values for the current episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    pub lambda: f64,
    /// Episode this state applies to, 1-based.
    pub episode: usize,
    pub epsilon: f64,
    pub eta: f64,
}

impl DualState {
    pub fn initial(config: &ScheduleConfig) -> Self {
        DualState {
            lambda: 0.0,
            episode: 1,
            epsilon: config.epsilon(1),
            eta: config.eta(1),
        }
    }

    /// Projected-subgradient ascent on the planned cost value, then advance
    /// the schedules to the next episode.
    pub fn advance(&self, planned_cost: f64, config: &ScheduleConfig) -> DualState {
        let next = self.episode + 1;
        DualState {
            lambda: (self.lambda + planned_cost + self.epsilon - config.tau).max(0.0),
            episode: next,
            epsilon: config.epsilon(next),
            eta: config.eta(next),
        }
    }

    /// Penalty weight `lambda / eta` in the Lagrangian reward.
    pub fn penalty(&self) -> f64 {
        self.lambda / self.eta
    }
}

/// The Lagrangian-greedy deterministic policy under a sampled kernel:
/// backward induction on the signal `r - (lambda/eta) c`.
pub fn primal_update(
    kernel: &Transitions,
    dual: &DualState,
    model: &TabularCmdp,
) -> Result<Policy> {
    if dual.eta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "dual temperature must be positive, got {}",
            dual.eta
        )));
    }
    let signal = lagrangian_signal(model, dual.penalty());
    let (policy, _) = solve_unconstrained_under(kernel, &signal, model.horizon())?;
    Ok(policy)
}

fn lagrangian_signal(model: &TabularCmdp, penalty: f64) -> SignalTable {
    combine_tables(model, |r, c| r - penalty * c)
}

fn combine_tables(model: &TabularCmdp, f: impl Fn(f64, f64) -> f64) -> SignalTable {
    let num_states = model.num_states();
    let num_actions = model.num_actions();
    if model.reward().is_stationary() && model.cost().is_stationary() {
        SignalTable::Stationary(
            (0..num_states)
                .map(|s| {
                    (0..num_actions)
                        .map(|a| f(model.reward().get(0, s, a), model.cost().get(0, s, a)))
                        .collect()
                })
                .collect(),
        )
    } else {
        SignalTable::PerStep(
            (0..model.horizon())
                .map(|h| {
                    (0..num_states)
                        .map(|s| {
                            (0..num_actions)
                                .map(|a| f(model.reward().get(h, s, a), model.cost().get(h, s, a)))
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Everything observed and planned during one episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    /// Episode index k, 1-based.
    pub episode: usize,
    pub policy: Policy,
    /// Planned value of the policy under the sampled kernel, reward signal.
    pub planned_reward: f64,
    /// Planned value under the sampled kernel, cost signal; this is what the
    /// dual update sees.
    pub planned_cost: f64,
    /// Realized (state, action) pairs, one per step.
    pub trajectory: Vec<(usize, usize)>,
    pub realized_reward: f64,
    pub realized_cost: f64,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// Whether the tightened budget `tau - epsilon_k` was achievable at all
    /// under the sampled kernel (min-cost value within budget).
    pub pessimistic_feasible: bool,
}

/// One online learning run against a ground-truth model.
///
/// Construction validates everything that could fail; stepping is then
/// total, so an in-flight run never aborts. Episode randomness is keyed by
/// (seed, episode), which makes replays and checkpoint resumes exact.
pub struct SafePsrlRun<'a> {
    model: &'a TabularCmdp,
    posterior: DirichletPosterior,
    config: ScheduleConfig,
    dual: DualState,
    seed: u64,
    dual_enabled: bool,
    negated_cost: SignalTable,
}

impl<'a> SafePsrlRun<'a> {
    pub fn new(
        model: &'a TabularCmdp,
        prior: DirichletPosterior,
        config: ScheduleConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::with_dual(model, prior, config, seed, true)
    }

    /// Posterior sampling with the dual ascent disabled: the multiplier is
    /// pinned at zero, so every episode plans pure reward maximization.
    pub fn unconstrained(
        model: &'a TabularCmdp,
        prior: DirichletPosterior,
        config: ScheduleConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::with_dual(model, prior, config, seed, false)
    }

    fn with_dual(
        model: &'a TabularCmdp,
        prior: DirichletPosterior,
        config: ScheduleConfig,
        seed: u64,
        dual_enabled: bool,
    ) -> Result<Self> {
        if !model.transitions().is_stationary() {
            return Err(Error::InvalidInput(
                "online learning assumes a stationary transition kernel".into(),
            ));
        }
        if prior.num_states() != model.num_states() || prior.num_actions() != model.num_actions() {
            return Err(Error::DimensionMismatch(format!(
                "posterior is {}x{}, model is {}x{}",
                prior.num_states(),
                prior.num_actions(),
                model.num_states(),
                model.num_actions()
            )));
        }
        if config.horizon != model.horizon()
            || config.num_states != model.num_states()
            || config.num_actions != model.num_actions()
        {
            return Err(Error::DimensionMismatch(
                "schedule config does not match model dimensions".into(),
            ));
        }
        let dual = DualState::initial(&config);
        let negated_cost = combine_tables(model, |_, c| -c);
        Ok(SafePsrlRun {
            model,
            posterior: prior,
            config,
            dual,
            seed,
            dual_enabled,
            negated_cost,
        })
    }

    /// Resume a run at `episode` (1-based) with a checkpointed posterior and
    /// dual variable.
    pub fn restore(
        model: &'a TabularCmdp,
        posterior: DirichletPosterior,
        config: ScheduleConfig,
        seed: u64,
        episode: usize,
        lambda: f64,
        dual_enabled: bool,
    ) -> Result<Self> {
        if episode == 0 {
            return Err(Error::InvalidInput("episodes are 1-based".into()));
        }
        if lambda < 0.0 || lambda.is_nan() {
            return Err(Error::InvalidInput(
                "dual variable cannot be negative".into(),
            ));
        }
        let mut run = Self::with_dual(model, posterior, config, seed, dual_enabled)?;
        run.dual = DualState {
            lambda,
            episode,
            epsilon: run.config.epsilon(episode),
            eta: run.config.eta(episode),
        };
        Ok(run)
    }

    pub fn posterior(&self) -> &DirichletPosterior {
        &self.posterior
    }

    pub fn dual(&self) -> &DualState {
        &self.dual
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    /// Next episode index, 1-based.
    pub fn episode(&self) -> usize {
        self.dual.episode
    }

    /// Execute one episode end to end.
    pub fn step(&mut self) -> EpisodeRecord {
        let k = self.dual.episode;
        let mut rng = episode_rng(self.seed, k as u64);
        let horizon = self.model.horizon();
        let s1 = self.model.initial_state();

        let kernel = self.posterior.sample(&mut rng).into_transitions();
        let policy = if self.dual_enabled {
            primal_update(&kernel, &self.dual, self.model)
        } else {
            solve_unconstrained_under(&kernel, self.model.reward(), horizon).map(|(p, _)| p)
        }
        .expect("inputs validated at construction");

        let planned_reward = evaluate_policy_under(&policy, &kernel, self.model.reward(), horizon)
            .expect("inputs validated at construction")
            .episode_value(s1);
        let planned_cost = evaluate_policy_under(&policy, &kernel, self.model.cost(), horizon)
            .expect("inputs validated at construction")
            .episode_value(s1);

        // Minimum planned cost achievable under the sampled kernel; tells
        // whether the tightened budget was satisfiable this episode.
        let min_planned_cost = -solve_unconstrained_under(&kernel, &self.negated_cost, horizon)
            .expect("inputs validated at construction")
            .1
            .episode_value(s1);

        let mut s = s1;
        let mut trajectory = Vec::with_capacity(horizon);
        let mut realized_reward = 0.0;
        let mut realized_cost = 0.0;
        for h in 0..horizon {
            let a = policy.sample_action(h, s, &mut rng);
            let (s_next, r, c) = crate::envs::simulate_step(self.model, h, s, a, &mut rng);
            trajectory.push((s, a));
            realized_reward += r;
            realized_cost += c;
            self.posterior
                .observe(s, a, s_next)
                .expect("indices from the model are in range");
            s = s_next;
        }

        let lambda_before = self.dual.lambda;
        let epsilon = self.dual.epsilon;
        let eta = self.dual.eta;
        let pessimistic_feasible = min_planned_cost <= self.config.tau - epsilon;
        self.dual = if self.dual_enabled {
            self.dual.advance(planned_cost, &self.config)
        } else {
            DualState {
                lambda: 0.0,
                episode: k + 1,
                epsilon: self.config.epsilon(k + 1),
                eta: self.config.eta(k + 1),
            }
        };

        EpisodeRecord {
            episode: k,
            policy,
            planned_reward,
            planned_cost,
            trajectory,
            realized_reward,
            realized_cost,
            lambda_before,
            lambda_after: self.dual.lambda,
            epsilon,
            eta,
            pessimistic_feasible,
        }
    }

    /// Run `episodes` more episodes, collecting records.
    pub fn take(&mut self, episodes: usize) -> Vec<EpisodeRecord> {
        (0..episodes).map(|_| self.step()).collect()
    }
}

/// Execute `episodes` episodes of the learner from a fresh prior.
pub fn run(
    model: &TabularCmdp,
    prior: DirichletPosterior,
    config: &ScheduleConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    if episodes == 0 {
        return Err(Error::InvalidInput("need at least one episode".into()));
    }
    let mut runner = SafePsrlRun::new(model, prior, config.clone(), seed)?;
    Ok(runner.take(episodes))
}
