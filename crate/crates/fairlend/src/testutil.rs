//! Shared helpers for unit tests.

use rand::Rng;

use crate::env::{Decision, EnvConfig, Group, GroupParams};
use crate::policy::PolicyParams;

pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn uniform_dist(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub fn pointmass(n: usize, level: usize) -> Vec<f64> {
    let mut dist = vec![0.0; n];
    dist[level - 1] = 1.0;
    dist
}

/// Random probability vector with strictly positive entries.
pub fn random_dist(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

fn random_drift(rng: &mut impl Rng) -> [f64; 3] {
    let raw = [
        rng.random::<f64>() + 0.05,
        rng.random::<f64>() + 0.05,
        rng.random::<f64>() + 0.05,
    ];
    let sum: f64 = raw.iter().sum();
    [raw[0] / sum, raw[1] / sum, raw[2] / sum]
}

fn random_group(rng: &mut impl Rng, num_levels: usize) -> GroupParams {
    GroupParams {
        init_score_dist: random_dist(rng, num_levels),
        repay_prob: (0..num_levels)
            .map(|_| 0.05 + 0.9 * rng.random::<f64>())
            .collect(),
        drift_dist: random_drift(rng),
    }
}

/// Arbitrary valid environment with independently drawn group tables.
pub fn random_config(rng: &mut impl Rng, num_levels: usize, horizon: usize) -> EnvConfig {
    let cfg = EnvConfig {
        num_levels,
        group_prior: 0.3 + 0.4 * rng.random::<f64>(),
        groups: [random_group(rng, num_levels), random_group(rng, num_levels)],
        reward_success: 1.0,
        reward_default: 2.0,
        horizon,
    };
    cfg.validate().expect("random config must be valid");
    cfg
}

/// Environment whose groups share every table.
pub fn symmetric_config(rng: &mut impl Rng, num_levels: usize, horizon: usize) -> EnvConfig {
    let shared = random_group(rng, num_levels);
    let cfg = EnvConfig {
        num_levels,
        group_prior: 0.5,
        groups: [shared.clone(), shared],
        reward_success: 1.0,
        reward_default: 2.0,
        horizon,
    };
    cfg.validate().expect("symmetric config must be valid");
    cfg
}

/// Policy with logits drawn uniformly from [-1.5, 1.5].
pub fn random_policy(rng: &mut impl Rng, num_levels: usize) -> PolicyParams {
    let mut params = PolicyParams::zeros(num_levels);
    for s in Group::BOTH {
        for x in 1..=num_levels {
            for d in Decision::BOTH {
                params.set_logit(s, x, d, 3.0 * rng.random::<f64>() - 1.5);
            }
        }
    }
    params
}
