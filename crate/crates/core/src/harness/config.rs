//! Experiment configuration document.
//!
//! Three JSON sections: `environment` (buffer benchmark parameters),
//! `algorithm` (learner knobs), `experiment` (episodes, seeds, outputs,
//! baseline toggles). Every omitted field falls back to the benchmark
//! defaults, so `{}` is already a runnable config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::MediaStreamingParams;
use crate::error::{Error, Result};

/// Learner parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmConfig {
    /// Cost level known to be satisfiable, strictly below the budget.
    pub c0: f64,
    /// Multiplier on the pessimism schedule.
    pub epsilon_scale: f64,
    /// Symmetric Dirichlet prior concentration.
    pub prior_alpha: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            c0: 1.0,
            epsilon_scale: 0.05,
            prior_alpha: 0.1,
        }
    }
}

/// Which reference strategies to run alongside the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineToggles {
    pub unconstrained_psrl: bool,
    pub safe_follow: bool,
}

impl Default for BaselineToggles {
    fn default() -> Self {
        BaselineToggles {
            unconstrained_psrl: true,
            safe_follow: true,
        }
    }
}

/// Run shape: how long, how many seeds, where outputs go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Defaults to `$CMDP_LAB_OUT`, then `./out`.
    pub output_dir: Option<PathBuf>,
    pub baselines: BaselineToggles,
    /// Episode batch between CSV flushes and posterior checkpoints.
    pub checkpoint_every: usize,
    /// Draw the ground-truth kernel from the prior per seed instead of using
    /// the environment's fixed kernel.
    pub truth_from_prior: bool,
    /// Continue learner runs from on-disk checkpoints when present.
    pub resume: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            episodes: 50_000,
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: None,
            baselines: BaselineToggles::default(),
            checkpoint_every: 1_000,
            truth_from_prior: false,
            resume: false,
        }
    }
}

/// Full experiment document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub environment: MediaStreamingParams,
    pub algorithm: AlgorithmConfig,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.experiment.episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be at least 1".into()));
        }
        if self.experiment.seeds.is_empty() {
            return Err(Error::InvalidConfig("need at least one seed".into()));
        }
        if self.experiment.checkpoint_every == 0 {
            return Err(Error::InvalidConfig(
                "checkpoint_every must be positive".into(),
            ));
        }
        if self.algorithm.prior_alpha <= 0.0 || self.algorithm.prior_alpha.is_nan() {
            return Err(Error::InvalidConfig("prior_alpha must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Output directory resolution order: explicit override, config field,
    /// `$CMDP_LAB_OUT`, then `./out`.
    pub fn resolve_output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        if let Some(dir) = override_dir {
            return dir.to_path_buf();
        }
        if let Some(dir) = &self.experiment.output_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var("CMDP_LAB_OUT") {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from("out")
    }

    /// Stable hex digest of the semantic run identity: environment,
    /// algorithm, and truth source. Output locations, seed lists, and the
    /// episode count do not participate: per-episode behavior is independent
    /// of how long the run is, so a checkpoint stays valid when a run is
    /// extended, and the same run written elsewhere hashes identically.
    pub fn semantic_hash(&self) -> String {
        let doc = serde_json::json!({
            "environment": self.environment,
            "algorithm": self.algorithm,
            "truth_from_prior": self.experiment.truth_from_prior,
        });
        let text = doc.to_string();
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            hash ^= u64::from(*b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}
