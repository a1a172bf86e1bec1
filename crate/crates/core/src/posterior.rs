//! Bayesian model of an unknown stationary transition kernel.
//!
//! Each (state, action) pair carries an independent Dirichlet distribution
//! over next states. Observing a transition increments one concentration
//! parameter, which is the exact Bayes update for a categorical likelihood.
//! Sampling a kernel draws each row from its Dirichlet via normalized Gamma
//! variates and is deterministic given the random source.
//!
//! Rewards and costs are assumed known, so the kernel is the only learned
//! object.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Transitions;

/// One kernel drawn from (or summarizing) the posterior: a probability row
/// over next states per (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    rows: Vec<Vec<Vec<f64>>>,
}

impl SampledKernel {
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.rows[s][a]
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rows[0].len()
    }

    /// Reinterpret as a stationary transition kernel for planning.
    pub fn into_transitions(self) -> Transitions {
        Transitions::Stationary(self.rows)
    }
}

/// Independent Dirichlet posterior per (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPosterior {
    alpha: Vec<Vec<Vec<f64>>>,
    prior_alpha: f64,
    total_observations: u64,
}

/// Snapshot layout for checkpoint/resume.
#[derive(Serialize, Deserialize)]
struct PosteriorDoc {
    num_states: usize,
    num_actions: usize,
    prior_alpha: f64,
    total_observations: u64,
    alpha: Vec<Vec<Vec<f64>>>,
}

impl DirichletPosterior {
    /// Symmetric prior with every concentration entry equal to `alpha0`.
    pub fn new(num_states: usize, num_actions: usize, alpha0: f64) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidInput(
                "posterior needs at least one state and action".into(),
            ));
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "prior concentration must be positive, got {alpha0}"
            )));
        }
        Ok(DirichletPosterior {
            alpha: vec![vec![vec![alpha0; num_states]; num_actions]; num_states],
            prior_alpha: alpha0,
            total_observations: 0,
        })
    }

    pub fn num_states(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_actions(&self) -> usize {
        self.alpha[0].len()
    }

    pub fn prior_alpha(&self) -> f64 {
        self.prior_alpha
    }

    pub fn total_observations(&self) -> u64 {
        self.total_observations
    }

    pub fn concentration(&self, s: usize, a: usize) -> &[f64] {
        &self.alpha[s][a]
    }

    /// Conjugate update for one observed transition (s, a) -> s_next.
    pub fn observe(&mut self, s: usize, a: usize, s_next: usize) -> Result<()> {
        let n = self.num_states();
        if s >= n || s_next >= n || a >= self.num_actions() {
            return Err(Error::InvalidInput(format!(
                "observation ({s}, {a}, {s_next}) out of range for {n} states x {} actions",
                self.num_actions()
            )));
        }
        self.alpha[s][a][s_next] += 1.0;
        self.total_observations += 1;
        Ok(())
    }

    /// Draw one kernel: each row independently Dirichlet(alpha[s][a]).
    pub fn sample(&self, rng: &mut impl Rng) -> SampledKernel {
        let rows = self
            .alpha
            .iter()
            .map(|by_action| {
                by_action
                    .iter()
                    .map(|row| sample_dirichlet(row, rng))
                    .collect()
            })
            .collect();
        SampledKernel { rows }
    }

    /// Posterior mean kernel: concentration rows normalized.
    pub fn mean(&self) -> SampledKernel {
        let rows = self
            .alpha
            .iter()
            .map(|by_action| {
                by_action
                    .iter()
                    .map(|row| {
                        let total: f64 = row.iter().sum();
                        row.iter().map(|&a| a / total).collect()
                    })
                    .collect()
            })
            .collect();
        SampledKernel { rows }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PosteriorDoc {
            num_states: self.num_states(),
            num_actions: self.num_actions(),
            prior_alpha: self.prior_alpha,
            total_observations: self.total_observations,
            alpha: self.alpha.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PosteriorDoc = serde_json::from_str(text)?;
        if doc.alpha.len() != doc.num_states
            || doc.alpha.iter().any(|by_action| {
                by_action.len() != doc.num_actions
                    || by_action.iter().any(|row| row.len() != doc.num_states)
            })
        {
            return Err(Error::DimensionMismatch(
                "posterior snapshot tables do not match declared dimensions".into(),
            ));
        }
        let positive = |a: f64| a.is_finite() && a > 0.0;
        if !positive(doc.prior_alpha) || !doc.alpha.iter().flatten().flatten().all(|&a| positive(a))
        {
            return Err(Error::InvalidInput(
                "posterior snapshot has non-positive concentration entries".into(),
            ));
        }
        let implied: f64 = doc
            .alpha
            .iter()
            .flatten()
            .flatten()
            .map(|&a| a - doc.prior_alpha)
            .sum();
        if (implied - doc.total_observations as f64).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "posterior snapshot counts ({implied}) disagree with total_observations ({})",
                doc.total_observations
            )));
        }
        Ok(DirichletPosterior {
            alpha: doc.alpha,
            prior_alpha: doc.prior_alpha,
            total_observations: doc.total_observations,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Dirichlet draw by Gamma normalization. The Gamma sampler handles shapes
/// below 1 (weak priors) via the standard boosting transformation.
fn sample_dirichlet(alpha: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total <= f64::MIN_POSITIVE {
        // All variates underflowed to zero; no information to weight by.
        let uniform = 1.0 / alpha.len() as f64;
        return vec![uniform; alpha.len()];
    }
    for d in draws.iter_mut() {
        *d /= total;
    }
    draws
}
