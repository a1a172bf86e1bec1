//! Shared independent oracles for the integration suites: exhaustive policy
//! enumeration, the two-policy mixture bound for single-budget problems, and
//! Monte-Carlo policy evaluation. None of these touch the planners they are
//! used to check.
//!
//! Each test binary compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use cmdp_lab::model::{Policy, SignalTable, TabularCmdp, Transitions};
use cmdp_lab::planning::{evaluate_policy, Signal};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Every deterministic non-stationary policy of the given shape, by decoding
/// indices in base `num_actions`.
pub fn deterministic_policies(
    horizon: usize,
    num_states: usize,
    num_actions: usize,
) -> impl Iterator<Item = Policy> {
    let slots = horizon * num_states;
    let total = num_actions.pow(slots as u32);
    (0..total).map(move |index| {
        Policy::deterministic(horizon, num_states, num_actions, |h, s| {
            let slot = h * num_states + s;
            (index / num_actions.pow(slot as u32)) % num_actions
        })
    })
}

/// Exhaustive maximum of the episode value over deterministic policies.
pub fn best_deterministic_value(model: &TabularCmdp, signal: &SignalTable) -> f64 {
    deterministic_policies(model.horizon(), model.num_states(), model.num_actions())
        .map(|policy| {
            evaluate_policy(&policy, model, Signal::Table(signal))
                .unwrap()
                .episode_value(model.initial_state())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Constrained optimum by enumerating deterministic policies and all
/// two-policy mixtures pinned to the budget. Exact for a single budget row,
/// where the LP optimum randomizes between at most two deterministic
/// policies. Returns `None` when no policy (hence no mixture) is feasible.
pub fn mixture_oracle_value(model: &TabularCmdp, threshold: f64) -> Option<f64> {
    let evaluations: Vec<(f64, f64)> =
        deterministic_policies(model.horizon(), model.num_states(), model.num_actions())
            .map(|policy| {
                let r = evaluate_policy(&policy, model, Signal::Reward)
                    .unwrap()
                    .episode_value(model.initial_state());
                let c = evaluate_policy(&policy, model, Signal::Cost)
                    .unwrap()
                    .episode_value(model.initial_state());
                (r, c)
            })
            .collect();

    let mut best: Option<f64> = None;
    let mut consider = |v: f64| {
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    };
    for &(r, c) in &evaluations {
        if c <= threshold + 1e-12 {
            consider(r);
        }
    }
    for &(r_i, c_i) in &evaluations {
        if c_i > threshold {
            continue;
        }
        for &(r_j, c_j) in &evaluations {
            if c_j <= threshold {
                continue;
            }
            // Mix exactly onto the budget: w c_i + (1 - w) c_j = threshold.
            let w = (threshold - c_j) / (c_i - c_j);
            if (0.0..=1.0).contains(&w) {
                consider(w * r_i + (1.0 - w) * r_j);
            }
        }
    }
    best
}

/// Sample-mean episode value of a policy, with its standard error.
pub fn monte_carlo_value(
    model: &TabularCmdp,
    policy: &Policy,
    signal: &SignalTable,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..episodes {
        let mut s = model.initial_state();
        let mut total = 0.0;
        for h in 0..model.horizon() {
            let a = policy.sample_action(h, s, rng);
            total += signal.get(h, s, a);
            let row = model.transitions().row(h, s, a);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = row.len() - 1;
            for (i, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = i;
                    break;
                }
            }
            s = next;
        }
        sum += total;
        sum_sq += total * total;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Random dense model: simplex-uniform transition rows, uniform rewards and
/// costs in [0, 1].
pub fn random_model(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    threshold: f64,
    rng: &mut ChaCha8Rng,
) -> TabularCmdp {
    let transitions: Vec<Vec<Vec<f64>>> = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| random_simplex_row(num_states, rng))
                .collect()
        })
        .collect();
    let reward: Vec<Vec<f64>> = (0..num_states)
        .map(|_| (0..num_actions).map(|_| rng.random()).collect())
        .collect();
    let cost: Vec<Vec<f64>> = (0..num_states)
        .map(|_| (0..num_actions).map(|_| rng.random()).collect())
        .collect();
    TabularCmdp::new(
        num_states,
        num_actions,
        horizon,
        0,
        Transitions::Stationary(transitions),
        SignalTable::Stationary(reward),
        SignalTable::Stationary(cost),
        threshold,
    )
    .unwrap()
}

/// Uniform point on the probability simplex via exponential spacings.
pub fn random_simplex_row(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let sum: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= sum;
    }
    // Absorb rounding into the largest entry so validation sees an exact row.
    let imax = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let others: f64 = row
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .map(|(_, v)| v)
        .sum();
    row[imax] = 1.0 - others;
    row
}

/// Beta(a, b) by Johnk's rejection method; exact for small shapes, which is
/// where weak Dirichlet priors live. Independent of the library's
/// Gamma-based route.
pub fn beta_johnk(a: f64, b: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let x = u.powf(1.0 / a);
        let y = v.powf(1.0 / b);
        let s = x + y;
        if s > 0.0 && s <= 1.0 {
            return x / s;
        }
    }
}

/// Stick-breaking Dirichlet: peel each coordinate off with a Beta marginal.
pub fn dirichlet_stick_breaking(alpha: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = alpha.len();
    let mut out = vec![0.0; n];
    let mut remaining_alpha: f64 = alpha.iter().sum();
    let mut remaining_mass = 1.0;
    for i in 0..n - 1 {
        remaining_alpha -= alpha[i];
        let fraction = beta_johnk(alpha[i], remaining_alpha, rng);
        out[i] = remaining_mass * fraction;
        remaining_mass *= 1.0 - fraction;
    }
    out[n - 1] = remaining_mass;
    out
}

/// Two-sample Kolmogorov-Smirnov statistic over sorted samples.
pub fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Random uniformly-mixed policy rows, for dominance property checks.
pub fn random_policy(
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    rng: &mut ChaCha8Rng,
) -> Policy {
    let probs: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|_| {
            (0..num_states)
                .map(|_| random_simplex_row(num_actions, rng))
                .collect()
        })
        .collect();
    Policy::new(probs).unwrap()
}
