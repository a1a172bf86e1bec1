//! Reference strategies the learner is measured against.
//!
//! - Unconstrained posterior sampling: the same sampling loop with the dual
//!   ascent disabled. It shows what the budget costs in reward and how much
//!   violation an unconstrained learner racks up.
//! - Safe-policy follower: plays a fixed policy that is feasible at a
//!   tightened budget `c0`, forever, learning nothing. Zero violation by
//!   construction, linearly growing reward regret.

use crate::error::{Error, Result};
use crate::lp::solve_with_threshold;
use crate::model::{Policy, TabularCmdp};
use crate::planning::{evaluate_policy, Signal};
use crate::posterior::DirichletPosterior;
use crate::safe_psrl::{EpisodeRecord, SafePsrlRun, ScheduleConfig};
use crate::seeding::episode_rng;

/// Posterior sampling with the constraint ignored (multiplier pinned at 0).
pub fn baseline_unconstrained_psrl(
    model: &TabularCmdp,
    prior: DirichletPosterior,
    config: &ScheduleConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    if episodes == 0 {
        return Err(Error::InvalidInput("need at least one episode".into()));
    }
    let mut runner = SafePsrlRun::unconstrained(model, prior, config.clone(), seed)?;
    Ok(runner.take(episodes))
}

/// The optimal policy of the model under the tightened budget `c0`.
pub fn safe_follow_policy(model: &TabularCmdp, c0: f64) -> Result<Policy> {
    let solution = solve_with_threshold(model, c0)?
        .into_optimal(&format!("no policy satisfies the tightened budget {c0}"))?;
    Ok(solution.policy)
}

/// Play `safe_policy` every episode with no learning. The policy must be
/// feasible at `c0` under the true model.
pub fn baseline_safe_follow(
    model: &TabularCmdp,
    safe_policy: &Policy,
    c0: f64,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    if episodes == 0 {
        return Err(Error::InvalidInput("need at least one episode".into()));
    }
    let s1 = model.initial_state();
    let planned_reward = evaluate_policy(safe_policy, model, Signal::Reward)?.episode_value(s1);
    let planned_cost = evaluate_policy(safe_policy, model, Signal::Cost)?.episode_value(s1);
    if planned_cost > c0 + 1e-9 {
        return Err(Error::Infeasible(format!(
            "safe policy costs {planned_cost}, above its claimed level {c0}"
        )));
    }

    let horizon = model.horizon();
    let mut records = Vec::with_capacity(episodes);
    for k in 1..=episodes {
        let mut rng = episode_rng(seed, k as u64);
        let mut s = s1;
        let mut trajectory = Vec::with_capacity(horizon);
        let mut realized_reward = 0.0;
        let mut realized_cost = 0.0;
        for h in 0..horizon {
            let a = safe_policy.sample_action(h, s, &mut rng);
            let (s_next, r, c) = crate::envs::simulate_step(model, h, s, a, &mut rng);
            trajectory.push((s, a));
            realized_reward += r;
            realized_cost += c;
            s = s_next;
        }
        records.push(EpisodeRecord {
            episode: k,
            policy: safe_policy.clone(),
            planned_reward,
            planned_cost,
            trajectory,
            realized_reward,
            realized_cost,
            lambda_before: 0.0,
            lambda_after: 0.0,
            epsilon: 0.0,
            eta: 0.0,
            pessimistic_feasible: true,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_media_streaming, MediaStreamingParams};
    use crate::harness::regret::compute_regret;
    use crate::lp::solve_constrained_lp;

    fn env() -> TabularCmdp {
        make_media_streaming(&MediaStreamingParams::default()).unwrap()
    }

    #[test]
    fn safe_follower_never_violates() {
        let model = env();
        let policy = safe_follow_policy(&model, 1.0).unwrap();
        let records = baseline_safe_follow(&model, &policy, 1.0, 50, 5).unwrap();
        let ledger = compute_regret(&records, &model).unwrap();
        // Constraint regret per episode is the constant V(c) - tau <= c0 - tau.
        let per_episode = ledger.constraint_gaps[0];
        assert!(per_episode <= 1.0 - 5.0 + 1e-9);
        for (i, &cum) in ledger.cum_constraint.iter().enumerate() {
            assert!((cum - per_episode * (i + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn safe_follower_reward_regret_is_linear_with_lp_slope() {
        let model = env();
        let policy = safe_follow_policy(&model, 1.0).unwrap();
        let records = baseline_safe_follow(&model, &policy, 1.0, 40, 5).unwrap();
        let ledger = compute_regret(&records, &model).unwrap();

        let v_star = solve_constrained_lp(&model)
            .unwrap()
            .into_optimal("env")
            .unwrap()
            .value;
        let v_safe = evaluate_policy(&policy, &model, Signal::Reward)
            .unwrap()
            .episode_value(model.initial_state());
        let slope = v_star - v_safe;
        assert!(slope > 0.0);
        for (i, &cum) in ledger.cum_reward.iter().enumerate() {
            assert!((cum - slope * (i + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn safe_follow_rejects_policy_beyond_claimed_level() {
        let model = env();
        // The unconstrained optimum leans on the fast service well past c0 = 1.
        let greedy = crate::planning::solve_unconstrained(&model, model.reward())
            .unwrap()
            .0;
        assert!(baseline_safe_follow(&model, &greedy, 1.0, 10, 5).is_err());
    }

    #[test]
    fn unconstrained_baseline_overshoots_budget_once_informed() {
        // With the budget ignored, the reward optimum leans on the metered
        // fast service nearly every step, so once the posterior has seen
        // some data the planned cost sits above the budget.
        let model = env();
        let cfg = ScheduleConfig::for_model(&model, 1.0, 0.05).unwrap();
        let records = baseline_unconstrained_psrl(
            &model,
            DirichletPosterior::new(11, 2, 0.1).unwrap(),
            &cfg,
            500,
            13,
        )
        .unwrap();
        let late = &records[250..];
        let over_budget = late
            .iter()
            .filter(|r| r.planned_cost > model.threshold())
            .count();
        assert!(
            over_budget * 2 > late.len(),
            "only {over_budget} of {} late episodes exceed the budget",
            late.len()
        );
    }

    #[test]
    fn unconstrained_baseline_is_deterministic_and_dual_free() {
        let model = env();
        let cfg = ScheduleConfig::for_model(&model, 1.0, 0.05).unwrap();
        let a = baseline_unconstrained_psrl(
            &model,
            DirichletPosterior::new(11, 2, 0.1).unwrap(),
            &cfg,
            30,
            2,
        )
        .unwrap();
        let b = baseline_unconstrained_psrl(
            &model,
            DirichletPosterior::new(11, 2, 0.1).unwrap(),
            &cfg,
            30,
            2,
        )
        .unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.trajectory, rb.trajectory);
            assert_eq!(ra.lambda_after, 0.0);
        }
    }
}
