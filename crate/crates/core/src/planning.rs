//! Exact finite-horizon planning by dynamic programming.
//!
//! Three oracles, all pure functions of their inputs:
//!
//! - [`evaluate_policy`]: the value of a randomized policy under a given
//!   scalar signal, by backward recursion
//!   `V_h(s) = sum_a pi_h(a|s) [ g_h(s,a) + sum_{s'} p_h(s'|s,a) V_{h+1}(s') ]`.
//! - [`solve_unconstrained`]: an optimal deterministic policy for an
//!   arbitrary (possibly signed) signal, by backward induction on the Bellman
//!   optimality equations `V_h(s) = max_a [ g_h(s,a) + p_h(.|s,a) V_{h+1} ]`.
//! - [`policy_occupancy`]: the state-action visitation probabilities induced
//!   by a policy, by forward recursion.
//!
//! Argmax ties are broken toward the lowest action index so repeated solves
//! are reproducible. The `_under` variants plan against an explicit kernel
//! instead of the model's own, which is how sampled kernels are planned for.

use crate::error::{Error, Result};
use crate::model::{OccupancyMeasure, Policy, SignalTable, TabularCmdp, Transitions, ValueTable};

/// Which scalar signal an evaluation runs on.
#[derive(Debug, Clone, Copy)]
pub enum Signal<'a> {
    /// The model's reward table.
    Reward,
    /// The model's constraint cost table.
    Cost,
    /// An explicit per-(h, s, a) table.
    Table(&'a SignalTable),
}

impl<'a> Signal<'a> {
    fn resolve(&self, model: &'a TabularCmdp) -> &'a SignalTable {
        match self {
            Signal::Reward => model.reward(),
            Signal::Cost => model.cost(),
            Signal::Table(t) => t,
        }
    }
}

/// Value of `policy` under the model's kernel and the selected signal.
pub fn evaluate_policy(policy: &Policy, model: &TabularCmdp, signal: Signal) -> Result<ValueTable> {
    let table = signal.resolve(model);
    table.validate_shape(
        model.num_states(),
        model.num_actions(),
        model.horizon(),
        "signal",
    )?;
    evaluate_policy_under(policy, model.transitions(), table, model.horizon())
}

/// Value of `policy` under an explicit kernel.
pub fn evaluate_policy_under(
    policy: &Policy,
    kernel: &Transitions,
    table: &SignalTable,
    horizon: usize,
) -> Result<ValueTable> {
    let (num_states, num_actions) = kernel.dims();
    check_policy_dims(policy, horizon, num_states, num_actions)?;

    let mut next = vec![0.0; num_states];
    let mut rows = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let mut current = vec![0.0; num_states];
        for (s, value) in current.iter_mut().enumerate() {
            let action_probs = policy.action_probs(h, s);
            let mut v = 0.0;
            for (a, &pa) in action_probs.iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                v += pa * (table.get(h, s, a) + expected_next(kernel.row(h, s, a), &next));
            }
            *value = v;
        }
        rows[h] = current.clone();
        next = current;
    }
    Ok(ValueTable::from_rows(rows))
}

/// Optimal deterministic policy and value table for an explicit signal under
/// the model's kernel. The signal may be signed (e.g. a Lagrangian reward)
/// but must be finite.
pub fn solve_unconstrained(
    model: &TabularCmdp,
    table: &SignalTable,
) -> Result<(Policy, ValueTable)> {
    table.validate_shape(
        model.num_states(),
        model.num_actions(),
        model.horizon(),
        "signal",
    )?;
    solve_unconstrained_under(model.transitions(), table, model.horizon())
}

/// Backward induction against an explicit kernel.
pub fn solve_unconstrained_under(
    kernel: &Transitions,
    table: &SignalTable,
    horizon: usize,
) -> Result<(Policy, ValueTable)> {
    table.validate_finite("signal")?;
    let (num_states, num_actions) = kernel.dims();
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::DimensionMismatch("empty planning problem".into()));
    }

    let mut next = vec![0.0; num_states];
    let mut rows = vec![Vec::new(); horizon];
    let mut choices = vec![vec![0usize; num_states]; horizon];
    for h in (0..horizon).rev() {
        let mut current = vec![0.0; num_states];
        for s in 0..num_states {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..num_actions {
                let q = table.get(h, s, a) + expected_next(kernel.row(h, s, a), &next);
                // Strict improvement keeps the lowest action index on ties.
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            current[s] = best_q;
            choices[h][s] = best_a;
        }
        rows[h] = current.clone();
        next = current;
    }
    let policy = Policy::deterministic(horizon, num_states, num_actions, |h, s| choices[h][s]);
    Ok((policy, ValueTable::from_rows(rows)))
}

/// Forward recursion producing the occupancy measure of `policy` under the
/// model's kernel.
pub fn policy_occupancy(policy: &Policy, model: &TabularCmdp) -> Result<OccupancyMeasure> {
    let horizon = model.horizon();
    let num_states = model.num_states();
    let num_actions = model.num_actions();
    check_policy_dims(policy, horizon, num_states, num_actions)?;

    let mut state_dist = vec![0.0; num_states];
    state_dist[model.initial_state()] = 1.0;
    let mut q = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut step = vec![vec![0.0; num_actions]; num_states];
        let mut next_dist = vec![0.0; num_states];
        for (s, &mass) in state_dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (a, &pa) in policy.action_probs(h, s).iter().enumerate() {
                let joint = mass * pa;
                if joint == 0.0 {
                    continue;
                }
                step[s][a] = joint;
                for (s_next, &p) in model.transitions().row(h, s, a).iter().enumerate() {
                    next_dist[s_next] += joint * p;
                }
            }
        }
        q.push(step);
        state_dist = next_dist;
    }
    Ok(OccupancyMeasure::from_raw(q))
}

fn expected_next(row: &[f64], next_values: &[f64]) -> f64 {
    row.iter().zip(next_values).map(|(&p, &v)| p * v).sum()
}

fn check_policy_dims(
    policy: &Policy,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
) -> Result<()> {
    if policy.horizon() != horizon
        || policy.num_states() != num_states
        || policy.num_actions() != num_actions
    {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}x{}, problem is {horizon}x{num_states}x{num_actions}",
            policy.horizon(),
            policy.num_states(),
            policy.num_actions()
        )));
    }
    Ok(())
}
