//! Finite-horizon tabular CMDP model types.
//!
//! A model is the tuple (states, actions, horizon, initial state, transition
//! kernel, reward table, cost table, cost threshold). Rewards and costs are
//! per-step means in [0, 1]; the constraint bounds the expected cumulative
//! cost of an episode by a threshold in (0, H].
//!
//! Step indices are 0-based throughout: `h` ranges over `0..horizon`.
//! Stationary models store a single transition table shared by every step and
//! expose it through the same per-step accessors as non-stationary ones.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability-row normalization checks.
pub const PROB_TOL: f64 = 1e-9;

/// Tolerance for occupancy-measure mass and flow checks.
pub const OCCUPANCY_TOL: f64 = 1e-7;

/// Transition kernel: one probability row over next states per (step, state,
/// action). `Stationary` stores `[s][a][s']` once; `PerStep` stores
/// `[h][s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Transitions {
    Stationary(Vec<Vec<Vec<f64>>>),
    PerStep(Vec<Vec<Vec<Vec<f64>>>>),
}

impl Transitions {
    pub fn is_stationary(&self) -> bool {
        matches!(self, Transitions::Stationary(_))
    }

    /// Probability row over next states at (h, s, a).
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        match self {
            Transitions::Stationary(t) => &t[s][a],
            Transitions::PerStep(t) => &t[h][s][a],
        }
    }

    /// (num_states, num_actions) implied by the stored tables.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Transitions::Stationary(t) => (t.len(), t.first().map_or(0, |r| r.len())),
            Transitions::PerStep(t) => t.first().map_or((0, 0), |step| {
                (step.len(), step.first().map_or(0, |r| r.len()))
            }),
        }
    }

    fn validate(&self, num_states: usize, num_actions: usize, horizon: usize) -> Result<()> {
        let steps: Vec<&Vec<Vec<Vec<f64>>>> = match self {
            Transitions::Stationary(t) => vec![t],
            Transitions::PerStep(t) => {
                if t.len() != horizon {
                    return Err(Error::DimensionMismatch(format!(
                        "transitions have {} steps, horizon is {horizon}",
                        t.len()
                    )));
                }
                t.iter().collect()
            }
        };
        for table in steps {
            if table.len() != num_states {
                return Err(Error::DimensionMismatch(format!(
                    "transition table has {} states, expected {num_states}",
                    table.len()
                )));
            }
            for (s, by_action) in table.iter().enumerate() {
                if by_action.len() != num_actions {
                    return Err(Error::DimensionMismatch(format!(
                        "state {s} has {} action rows, expected {num_actions}",
                        by_action.len()
                    )));
                }
                for (a, row) in by_action.iter().enumerate() {
                    validate_probability_row(row, num_states, PROB_TOL).map_err(|msg| {
                        Error::InvalidModel(format!("transition row (s={s}, a={a}): {msg}"))
                    })?;
                }
            }
        }
        Ok(())
    }
}

/// Per-(step, state, action) scalar table, used for rewards, costs, and
/// arbitrary planning signals. Stationary tables are `[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalTable {
    Stationary(Vec<Vec<f64>>),
    PerStep(Vec<Vec<Vec<f64>>>),
}

impl SignalTable {
    /// Table with every entry equal to `value`.
    pub fn constant(value: f64, num_states: usize, num_actions: usize) -> Self {
        SignalTable::Stationary(vec![vec![value; num_actions]; num_states])
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        match self {
            SignalTable::Stationary(t) => t[s][a],
            SignalTable::PerStep(t) => t[h][s][a],
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, SignalTable::Stationary(_))
    }

    pub(crate) fn validate_shape(
        &self,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        what: &str,
    ) -> Result<()> {
        let steps: Vec<&Vec<Vec<f64>>> = match self {
            SignalTable::Stationary(t) => vec![t],
            SignalTable::PerStep(t) => {
                if t.len() != horizon {
                    return Err(Error::DimensionMismatch(format!(
                        "{what} table has {} steps, horizon is {horizon}",
                        t.len()
                    )));
                }
                t.iter().collect()
            }
        };
        for table in steps {
            if table.len() != num_states || table.iter().any(|row| row.len() != num_actions) {
                return Err(Error::DimensionMismatch(format!(
                    "{what} table does not match {num_states} states x {num_actions} actions"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn validate_unit_range(&self, what: &str) -> Result<()> {
        let ok = self.values().all(|v| (0.0..=1.0).contains(&v));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "{what} entries must lie in [0, 1]"
            )))
        }
    }

    pub(crate) fn validate_finite(&self, what: &str) -> Result<()> {
        if self.values().all(f64::is_finite) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{what} contains non-finite entries"
            )))
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            SignalTable::Stationary(t) => Box::new(t.iter().flatten().copied()),
            SignalTable::PerStep(t) => Box::new(t.iter().flatten().flatten().copied()),
        }
    }
}

/// Non-stationary randomized policy: a probability row over actions per
/// (step, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    probs: Vec<Vec<Vec<f64>>>,
}

impl Policy {
    /// Validates that every action row is a probability vector.
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::InvalidInput("policy has no steps or states".into()));
        }
        let num_states = probs[0].len();
        let num_actions = probs[0][0].len();
        for (h, by_state) in probs.iter().enumerate() {
            if by_state.len() != num_states {
                return Err(Error::DimensionMismatch(format!(
                    "policy step {h} has {} states, expected {num_states}",
                    by_state.len()
                )));
            }
            for (s, row) in by_state.iter().enumerate() {
                validate_probability_row(row, num_actions, PROB_TOL).map_err(|msg| {
                    Error::InvalidInput(format!("policy row (h={h}, s={s}): {msg}"))
                })?;
            }
        }
        Ok(Policy { probs })
    }

    /// Deterministic policy taking `choose(h, s)` at every (step, state).
    pub fn deterministic(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        mut choose: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let probs = (0..horizon)
            .map(|h| {
                (0..num_states)
                    .map(|s| {
                        let mut row = vec![0.0; num_actions];
                        row[choose(h, s)] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Policy { probs }
    }

    /// Uniformly random policy.
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Policy {
            probs: vec![vec![vec![p; num_actions]; num_states]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn num_states(&self) -> usize {
        self.probs[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0][0].len()
    }

    /// Action distribution at (h, s).
    pub fn action_probs(&self, h: usize, s: usize) -> &[f64] {
        &self.probs[h][s]
    }

    /// Draw an action from the row at (h, s) by inverse-CDF walk.
    pub fn sample_action(&self, h: usize, s: usize, rng: &mut impl Rng) -> usize {
        sample_index(&self.probs[h][s], rng)
    }
}

/// Draw an index proportionally to `weights` (assumed normalized).
pub(crate) fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// State values per (step, state). Values at the step just past the horizon
/// are identically zero and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub(crate) fn from_rows(values: Vec<Vec<f64>>) -> Self {
        ValueTable { values }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, h: usize, s: usize) -> f64 {
        self.values[h][s]
    }

    /// Value of the whole episode from the given start state.
    pub fn episode_value(&self, initial_state: usize) -> f64 {
        self.values[0][initial_state]
    }
}

/// State-action visitation probabilities per step: `q[h][s][a]` is the
/// probability of being in `s` and taking `a` at step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    q: Vec<Vec<Vec<f64>>>,
}

impl OccupancyMeasure {
    pub(crate) fn from_raw(q: Vec<Vec<Vec<f64>>>) -> Self {
        OccupancyMeasure { q }
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[h][s][a]
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    /// Total mass at one step; 1 for any valid occupancy measure.
    pub fn step_mass(&self, h: usize) -> f64 {
        self.q[h].iter().flatten().sum()
    }

    /// Inner product with a per-(h, s, a) signal table.
    pub fn expected_signal(&self, table: &SignalTable) -> f64 {
        let mut total = 0.0;
        for (h, by_state) in self.q.iter().enumerate() {
            for (s, row) in by_state.iter().enumerate() {
                for (a, &mass) in row.iter().enumerate() {
                    total += mass * table.get(h, s, a);
                }
            }
        }
        total
    }

    /// Conditional action distribution per (step, state). States carrying no
    /// mass at a step get the uniform distribution; the choice there cannot
    /// affect any value.
    pub fn extract_policy(&self) -> Policy {
        let num_actions = self.q[0][0].len();
        let probs = self
            .q
            .iter()
            .map(|by_state| {
                by_state
                    .iter()
                    .map(|row| {
                        let mass: f64 = row.iter().sum();
                        if mass > OCCUPANCY_TOL {
                            row.iter().map(|&v| (v / mass).max(0.0)).collect()
                        } else {
                            vec![1.0 / num_actions as f64; num_actions]
                        }
                    })
                    .map(|row: Vec<f64>| {
                        let sum: f64 = row.iter().sum();
                        row.into_iter().map(|v| v / sum).collect()
                    })
                    .collect()
            })
            .collect();
        Policy { probs }
    }

    /// Check step masses, the initial-state condition, and flow conservation
    /// against a kernel, all at [`OCCUPANCY_TOL`].
    pub fn check_consistency(&self, transitions: &Transitions, initial_state: usize) -> Result<()> {
        let horizon = self.q.len();
        for h in 0..horizon {
            if (self.step_mass(h) - 1.0).abs() > OCCUPANCY_TOL {
                return Err(Error::InvalidInput(format!(
                    "occupancy mass at step {h} is {}, expected 1",
                    self.step_mass(h)
                )));
            }
        }
        for (s, row) in self.q[0].iter().enumerate() {
            let mass: f64 = row.iter().sum();
            let expected = if s == initial_state { 1.0 } else { 0.0 };
            if (mass - expected).abs() > OCCUPANCY_TOL {
                return Err(Error::InvalidInput(format!(
                    "initial occupancy at state {s} is {mass}, expected {expected}"
                )));
            }
        }
        let num_states = self.q[0].len();
        for h in 0..horizon.saturating_sub(1) {
            for s_next in 0..num_states {
                let inflow: f64 = self.q[h]
                    .iter()
                    .enumerate()
                    .map(|(s, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(a, &mass)| mass * transitions.row(h, s, a)[s_next])
                            .sum::<f64>()
                    })
                    .sum();
                let outflow: f64 = self.q[h + 1][s_next].iter().sum();
                if (inflow - outflow).abs() > OCCUPANCY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "flow violated at step {}, state {s_next}: in {inflow}, out {outflow}",
                        h + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Complete tabular constrained MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCmdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    transitions: Transitions,
    reward: SignalTable,
    cost: SignalTable,
    threshold: f64,
}

/// On-disk JSON layout for a model.
#[derive(Serialize, Deserialize)]
struct ModelDoc {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    transitions: Transitions,
    reward: SignalTable,
    cost: SignalTable,
    threshold: f64,
}

impl TabularCmdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_state: usize,
        transitions: Transitions,
        reward: SignalTable,
        cost: SignalTable,
        threshold: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidModel(
                "num_states, num_actions, and horizon must be positive".into(),
            ));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidModel(format!(
                "initial state {initial_state} out of range for {num_states} states"
            )));
        }
        transitions.validate(num_states, num_actions, horizon)?;
        reward.validate_shape(num_states, num_actions, horizon, "reward")?;
        reward.validate_unit_range("reward")?;
        cost.validate_shape(num_states, num_actions, horizon, "cost")?;
        cost.validate_unit_range("cost")?;
        if !(threshold > 0.0 && threshold <= horizon as f64) {
            return Err(Error::InvalidModel(format!(
                "threshold {threshold} must lie in (0, {horizon}]"
            )));
        }
        Ok(TabularCmdp {
            num_states,
            num_actions,
            horizon,
            initial_state,
            transitions,
            reward,
            cost,
            threshold,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn reward(&self) -> &SignalTable {
        &self.reward
    }

    pub fn cost(&self) -> &SignalTable {
        &self.cost
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Same model with the transition kernel replaced (used to plan against a
    /// sampled kernel). Rewards, costs, and threshold are shared.
    pub fn with_transitions(&self, transitions: Transitions) -> Result<Self> {
        TabularCmdp::new(
            self.num_states,
            self.num_actions,
            self.horizon,
            self.initial_state,
            transitions,
            self.reward.clone(),
            self.cost.clone(),
            self.threshold,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            initial_state: self.initial_state,
            transitions: self.transitions.clone(),
            reward: self.reward.clone(),
            cost: self.cost.clone(),
            threshold: self.threshold,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parse and re-validate a model document; probability rows are checked
    /// on load.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        TabularCmdp::new(
            doc.num_states,
            doc.num_actions,
            doc.horizon,
            doc.initial_state,
            doc.transitions,
            doc.reward,
            doc.cost,
            doc.threshold,
        )
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn validate_probability_row(row: &[f64], len: usize, tol: f64) -> std::result::Result<(), String> {
    if row.len() != len {
        return Err(format!("length {} does not match {len}", row.len()));
    }
    if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err("negative or non-finite entry".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("sums to {sum}, expected 1"));
    }
    Ok(())
}
