//! Benchmark environments and trajectory simulation.
//!
//! The media-streaming buffer: a device streams packets from a base station
//! that serves at a fast or a slow speed. Arrivals are Bernoulli with mean
//! `mu_fast` or `mu_slow` depending on the chosen speed, departures are
//! Bernoulli with mean `departure_rate`, and the buffer level evolves as
//! `s' = clamp(s + arrival - departure, 0, capacity)`. Letting the buffer
//! run empty forfeits reward, while each use of the fast service incurs one
//! unit of constraint cost; the budget caps expected fast-service use per
//! episode.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_index, SignalTable, TabularCmdp, Transitions};

/// Action index for the fast (metered) service speed.
pub const ACTION_FAST: usize = 0;
/// Action index for the slow (free) service speed.
pub const ACTION_SLOW: usize = 1;

/// Parameters of the media-streaming buffer environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MediaStreamingParams {
    /// Maximum buffer level; states are the levels `0..=buffer_capacity`.
    pub buffer_capacity: usize,
    /// Arrival probability under the fast service.
    pub mu_fast: f64,
    /// Arrival probability under the slow service.
    pub mu_slow: f64,
    /// Packet departure probability per step.
    pub departure_rate: f64,
    pub horizon: usize,
    /// Budget on expected fast-service uses per episode.
    pub threshold: f64,
    /// Buffer level every episode starts from.
    pub initial_buffer: usize,
}

impl Default for MediaStreamingParams {
    fn default() -> Self {
        MediaStreamingParams {
            buffer_capacity: 10,
            mu_fast: 0.9,
            mu_slow: 0.1,
            departure_rate: 0.4,
            horizon: 10,
            threshold: 5.0,
            initial_buffer: 5,
        }
    }
}

impl MediaStreamingParams {
    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("mu_fast", self.mu_fast),
            ("mu_slow", self.mu_slow),
            ("departure_rate", self.departure_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {value} must lie in [0, 1]"
                )));
            }
        }
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig(
                "buffer capacity must be at least 1".into(),
            ));
        }
        if self.initial_buffer > self.buffer_capacity {
            return Err(Error::InvalidConfig(format!(
                "initial buffer {} exceeds capacity {}",
                self.initial_buffer, self.buffer_capacity
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Build the buffer environment as a stationary tabular CMDP.
///
/// Each transition row enumerates the four (arrival, departure) outcomes and
/// clamps at the buffer boundaries; the highest reachable level absorbs the
/// rounding residue so every row sums to exactly 1. Reward is 1 whenever the
/// buffer is nonempty, cost is 1 whenever the fast service is used.
pub fn make_media_streaming(params: &MediaStreamingParams) -> Result<TabularCmdp> {
    params.validate()?;
    let num_states = params.buffer_capacity + 1;
    let gamma = params.departure_rate;

    let mut table = vec![vec![vec![0.0; num_states]; 2]; num_states];
    for (s, by_action) in table.iter_mut().enumerate() {
        for (a, row) in by_action.iter_mut().enumerate() {
            let mu = if a == ACTION_FAST {
                params.mu_fast
            } else {
                params.mu_slow
            };
            for (arrival, p_arrival) in [(0i64, 1.0 - mu), (1, mu)] {
                for (departure, p_departure) in [(0i64, 1.0 - gamma), (1, gamma)] {
                    let next = (s as i64 + arrival - departure)
                        .clamp(0, params.buffer_capacity as i64)
                        as usize;
                    row[next] += p_arrival * p_departure;
                }
            }
            if let Some(last) = (0..num_states).rev().find(|&i| row[i] > 0.0) {
                let others: f64 = row[..last].iter().sum();
                row[last] = 1.0 - others;
            }
        }
    }

    let reward: Vec<Vec<f64>> = (0..num_states)
        .map(|s| vec![if s == 0 { 0.0 } else { 1.0 }; 2])
        .collect();
    let cost: Vec<Vec<f64>> = (0..num_states).map(|_| vec![1.0, 0.0]).collect();

    TabularCmdp::new(
        num_states,
        2,
        params.horizon,
        params.initial_buffer,
        Transitions::Stationary(table),
        SignalTable::Stationary(reward),
        SignalTable::Stationary(cost),
        params.threshold,
    )
}

/// Draw one environment step from the model: the successor state from the
/// transition row at (h, s, a), plus the (mean) reward and cost incurred.
///
/// Indices must be in range for the model.
pub fn simulate_step(
    model: &TabularCmdp,
    h: usize,
    s: usize,
    a: usize,
    rng: &mut ChaCha8Rng,
) -> (usize, f64, f64) {
    assert!(
        h < model.horizon() && s < model.num_states() && a < model.num_actions(),
        "simulate_step index out of range: (h={h}, s={s}, a={a})"
    );
    let s_next = sample_index(model.transitions().row(h, s, a), rng);
    (
        s_next,
        model.reward().get(h, s, a),
        model.cost().get(h, s, a),
    )
}

/// Roll one full episode under `policy` from the model's initial state.
/// Returns the (state, action) pairs and the realized cumulative reward and
/// cost.
pub fn simulate_episode(
    model: &TabularCmdp,
    policy: &crate::model::Policy,
    rng: &mut ChaCha8Rng,
) -> (Vec<(usize, usize)>, f64, f64) {
    let mut s = model.initial_state();
    let mut trajectory = Vec::with_capacity(model.horizon());
    let mut reward = 0.0;
    let mut cost = 0.0;
    for h in 0..model.horizon() {
        let a = policy.sample_action(h, s, rng);
        let (s_next, r, c) = simulate_step(model, h, s, a, rng);
        trajectory.push((s, a));
        reward += r;
        cost += c;
        s = s_next;
    }
    (trajectory, reward, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn default_env() -> TabularCmdp {
        make_media_streaming(&MediaStreamingParams::default()).unwrap()
    }

    #[test]
    fn interior_fast_row_matches_outcome_enumeration() {
        // mu = 0.9, gamma = 0.4 from level 3: up 0.54, stay 0.42, down 0.04.
        let env = default_env();
        let row = env.transitions().row(0, 3, ACTION_FAST);
        assert!((row[4] - 0.54).abs() < 1e-12);
        assert!((row[3] - 0.42).abs() < 1e-12);
        assert!((row[2] - 0.04).abs() < 1e-12);
        assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 3);
    }

    #[test]
    fn empty_buffer_clamps_merge_outcomes() {
        let env = default_env();
        let row = env.transitions().row(0, 0, ACTION_FAST);
        assert!((row[0] - 0.46).abs() < 1e-12);
        assert!((row[1] - 0.54).abs() < 1e-12);
    }

    #[test]
    fn full_buffer_clamps_at_capacity() {
        let env = default_env();
        let row = env.transitions().row(0, 10, ACTION_FAST);
        // Only "stay full" and "drop one" are possible.
        assert!((row[9] - 0.04).abs() < 1e-12);
        assert!((row[10] - 0.96).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_exactly_one() {
        let env = default_env();
        for s in 0..env.num_states() {
            for a in 0..2 {
                let sum: f64 = env.transitions().row(0, s, a).iter().sum();
                assert_eq!(sum, 1.0, "row (s={s}, a={a})");
            }
        }
    }

    #[test]
    fn reward_penalizes_only_empty_buffer() {
        let env = default_env();
        for a in 0..2 {
            assert_eq!(env.reward().get(0, 0, a), 0.0);
            for s in 1..env.num_states() {
                assert_eq!(env.reward().get(0, s, a), 1.0);
            }
        }
    }

    #[test]
    fn cost_charges_only_fast_service() {
        let env = default_env();
        for s in 0..env.num_states() {
            assert_eq!(env.cost().get(0, s, ACTION_FAST), 1.0);
            assert_eq!(env.cost().get(0, s, ACTION_SLOW), 0.0);
        }
    }

    #[test]
    fn equal_speeds_make_actions_indistinguishable() {
        let params = MediaStreamingParams {
            mu_slow: 0.9,
            ..MediaStreamingParams::default()
        };
        let env = make_media_streaming(&params).unwrap();
        for s in 0..env.num_states() {
            assert_eq!(
                env.transitions().row(0, s, ACTION_FAST),
                env.transitions().row(0, s, ACTION_SLOW)
            );
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        for bad in [
            MediaStreamingParams {
                mu_fast: 1.2,
                ..Default::default()
            },
            MediaStreamingParams {
                departure_rate: -0.1,
                ..Default::default()
            },
            MediaStreamingParams {
                initial_buffer: 11,
                ..Default::default()
            },
            MediaStreamingParams {
                buffer_capacity: 0,
                initial_buffer: 0,
                ..Default::default()
            },
        ] {
            assert!(make_media_streaming(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn point_mass_row_always_yields_its_successor() {
        let model = TabularCmdp::new(
            2,
            1,
            1,
            0,
            Transitions::Stationary(vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]]),
            SignalTable::constant(0.25, 2, 1),
            SignalTable::constant(0.5, 2, 1),
            1.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (s_next, r, c) = simulate_step(&model, 0, 0, 0, &mut rng);
            assert_eq!(s_next, 1);
            assert_eq!(r, 0.25);
            assert_eq!(c, 0.5);
        }
    }

    #[test]
    fn step_frequencies_track_transition_row() {
        let env = default_env();
        let row = env.transitions().row(0, 5, ACTION_SLOW).to_vec();
        let mut counts = vec![0usize; env.num_states()];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000;
        for _ in 0..draws {
            let (s_next, _, _) = simulate_step(&env, 0, 5, ACTION_SLOW, &mut rng);
            counts[s_next] += 1;
        }
        for (s_next, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!(
                (freq - row[s_next]).abs() < 0.01,
                "state {s_next}: {freq} vs {}",
                row[s_next]
            );
        }
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let env = default_env();
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            assert_eq!(
                simulate_step(&env, 0, 4, ACTION_FAST, &mut a),
                simulate_step(&env, 0, 4, ACTION_FAST, &mut b)
            );
        }
    }
}
