//! Constrained planning via the occupancy-measure linear program.
//!
//! Variables are the visitation probabilities `q_h(s,a)`. The program is
//!
//! ```text
//!   max  sum_{h,s,a} q_h(s,a) r_h(s,a)
//!   s.t. sum_a q_0(s,a) = 1{s = s_1}                        (start)
//!        sum_a q_{h+1}(s',a) = sum_{s,a} p_h(s'|s,a) q_h(s,a)  (flow)
//!        sum_{h,s,a} q_h(s,a) c_h(s,a) <= threshold          (budget)
//!        q >= 0
//! ```
//!
//! An optimal policy is read off as `pi_h(a|s) = q_h(s,a) / sum_a q_h(s,a)`,
//! uniform wherever a state carries no mass at a step. With a single budget
//! row the optimum randomizes between at most two deterministic policies,
//! which is what the enumeration cross-checks in the tests exploit.

use crate::error::{Error, Result};
use crate::model::{OccupancyMeasure, Policy, TabularCmdp};
use crate::simplex::{maximize, Constraint, LpOutcome};

/// Solved constrained program: extracted policy, its objective value, and
/// the optimizing occupancy measure.
#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub policy: Policy,
    pub value: f64,
    pub occupancy: OccupancyMeasure,
}

/// Outcome of [`solve_constrained_lp`]; an unsatisfiable budget yields
/// `Infeasible` rather than an error.
#[derive(Debug, Clone)]
pub enum ConstrainedOutcome {
    Optimal(ConstrainedSolution),
    Infeasible,
}

impl ConstrainedOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ConstrainedOutcome::Optimal(_))
    }

    /// The solution, or an `Infeasible` error carrying `context`.
    pub fn into_optimal(self, context: &str) -> Result<ConstrainedSolution> {
        match self {
            ConstrainedOutcome::Optimal(s) => Ok(s),
            ConstrainedOutcome::Infeasible => Err(Error::Infeasible(context.into())),
        }
    }
}

/// Maximize expected cumulative reward subject to the expected cumulative
/// cost staying within the model's threshold.
pub fn solve_constrained_lp(model: &TabularCmdp) -> Result<ConstrainedOutcome> {
    solve_with_threshold(model, model.threshold())
}

/// Same program with an explicit budget, used for tightened thresholds.
pub fn solve_with_threshold(model: &TabularCmdp, threshold: f64) -> Result<ConstrainedOutcome> {
    let num_states = model.num_states();
    let num_actions = model.num_actions();
    let horizon = model.horizon();
    let n = horizon * num_states * num_actions;
    let var = |h: usize, s: usize, a: usize| (h * num_states + s) * num_actions + a;

    let mut objective = vec![0.0; n];
    let mut budget = vec![0.0; n];
    for h in 0..horizon {
        for s in 0..num_states {
            for a in 0..num_actions {
                objective[var(h, s, a)] = model.reward().get(h, s, a);
                budget[var(h, s, a)] = model.cost().get(h, s, a);
            }
        }
    }

    let mut constraints = Vec::with_capacity(horizon * num_states + 1);
    for s in 0..num_states {
        let mut coeffs = vec![0.0; n];
        for a in 0..num_actions {
            coeffs[var(0, s, a)] = 1.0;
        }
        let rhs = if s == model.initial_state() { 1.0 } else { 0.0 };
        constraints.push(Constraint::eq(coeffs, rhs));
    }
    for h in 0..horizon - 1 {
        for s_next in 0..num_states {
            let mut coeffs = vec![0.0; n];
            for a in 0..num_actions {
                coeffs[var(h + 1, s_next, a)] = 1.0;
            }
            for s in 0..num_states {
                for a in 0..num_actions {
                    coeffs[var(h, s, a)] -= model.transitions().row(h, s, a)[s_next];
                }
            }
            constraints.push(Constraint::eq(coeffs, 0.0));
        }
    }
    constraints.push(Constraint::le(budget, threshold));

    let solution = match maximize(&objective, &constraints)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => return Ok(ConstrainedOutcome::Infeasible),
    };

    let q: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|h| {
            (0..num_states)
                .map(|s| (0..num_actions).map(|a| solution.x[var(h, s, a)]).collect())
                .collect()
        })
        .collect();
    let occupancy = OccupancyMeasure::from_raw(q);
    let policy = occupancy.extract_policy();
    Ok(ConstrainedOutcome::Optimal(ConstrainedSolution {
        policy,
        value: solution.objective,
        occupancy,
    }))
}
