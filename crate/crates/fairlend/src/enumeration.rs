//! Exhaustive trajectory enumeration for small instances.
//!
//! Walks the full outcome tree of an episode, branching over decisions,
//! repayment outcomes and drift draws at every step, and accumulates
//! probability-weighted cumulative gains. No memoization and no shared
//! kernel code: transitions and gains are recomputed from the raw config,
//! which keeps this path independent of the dynamic-programming tables it
//! is used to cross-check.

use crate::env::{next_score, Decision, EnvConfig, Group, DRIFT_SUPPORT};
use crate::error::{Error, Result};
use crate::policy::{action_probabilities, PolicyKind};

/// Largest score count accepted for enumeration.
pub const MAX_LEVELS: usize = 4;
/// Largest horizon accepted for enumeration.
pub const MAX_HORIZON: usize = 4;

pub fn check_capacity(config: &EnvConfig) -> Result<()> {
    if config.num_levels > MAX_LEVELS || config.horizon > MAX_HORIZON {
        return Err(Error::EnumerationCapacity {
            num_levels: config.num_levels,
            horizon: config.horizon,
            max_levels: MAX_LEVELS,
            max_horizon: MAX_HORIZON,
        });
    }
    Ok(())
}

fn cubic_gain(config: &EnvConfig, from: usize, to: usize) -> f64 {
    let c = config.num_levels as i64;
    let denom = (c * c * c - (c - 1) * (c - 1) * (c - 1)) as f64;
    let (a, b) = (from as i64, to as i64);
    ((b * b * b - a * a * a) as f64) / denom
}

/// Expected cumulative gain from `start` at the first timestep, summed
/// over every trajectory the instance can produce.
pub fn enumerate_value(kind: &PolicyKind, s: Group, config: &EnvConfig, start: usize) -> f64 {
    check_capacity(config).expect("enumeration capacity checked by caller");
    assert!(
        start >= 1 && start <= config.num_levels,
        "start score {start} outside 1..={}",
        config.num_levels
    );
    recurse(kind, s, config, start, 1)
}

fn recurse(kind: &PolicyKind, s: Group, config: &EnvConfig, x: usize, t: usize) -> f64 {
    if t > config.horizon {
        return 0.0;
    }
    let drift = config.drift(s);
    match kind {
        PolicyKind::BaselinePi0 => {
            let mut total = 0.0;
            for (k, &offset) in DRIFT_SUPPORT.iter().enumerate() {
                if drift[k] == 0.0 {
                    continue;
                }
                let next = next_score(x, Decision::Deny, offset, false, config.num_levels);
                total += drift[k]
                    * (cubic_gain(config, x, next) + recurse(kind, s, config, next, t + 1));
            }
            total
        }
        PolicyKind::Behavior(params) => {
            let probs = action_probabilities(params, x, s);
            let repay = config.repay(s, x);
            let mut total = 0.0;
            for (k, &offset) in DRIFT_SUPPORT.iter().enumerate() {
                if drift[k] == 0.0 {
                    continue;
                }
                // Denial branch.
                let denied = next_score(x, Decision::Deny, offset, false, config.num_levels);
                total += probs[Decision::Deny.index()]
                    * drift[k]
                    * (cubic_gain(config, x, denied) + recurse(kind, s, config, denied, t + 1));
                // Approval branches split on the repayment outcome.
                for (repays, weight) in [(true, repay), (false, 1.0 - repay)] {
                    if weight == 0.0 {
                        continue;
                    }
                    let next = next_score(x, Decision::Approve, offset, repays, config.num_levels);
                    total += probs[Decision::Approve.index()]
                        * drift[k]
                        * weight
                        * (cubic_gain(config, x, next) + recurse(kind, s, config, next, t + 1));
                }
            }
            total
        }
        PolicyKind::VirtualPs(params) => {
            // Gain is attributed along a hypothetical denial branch while
            // the trajectory itself advances under the behavior policy.
            let mut instantaneous = 0.0;
            for (k, &offset) in DRIFT_SUPPORT.iter().enumerate() {
                if drift[k] == 0.0 {
                    continue;
                }
                let hypothetical =
                    next_score(x, Decision::Deny, offset, false, config.num_levels);
                instantaneous += drift[k] * cubic_gain(config, x, hypothetical);
            }
            let probs = action_probabilities(params, x, s);
            let repay = config.repay(s, x);
            let mut continuation = 0.0;
            for (k, &offset) in DRIFT_SUPPORT.iter().enumerate() {
                if drift[k] == 0.0 {
                    continue;
                }
                let denied = next_score(x, Decision::Deny, offset, false, config.num_levels);
                continuation += probs[Decision::Deny.index()]
                    * drift[k]
                    * recurse(kind, s, config, denied, t + 1);
                for (repays, weight) in [(true, repay), (false, 1.0 - repay)] {
                    if weight == 0.0 {
                        continue;
                    }
                    let next = next_score(x, Decision::Approve, offset, repays, config.num_levels);
                    continuation += probs[Decision::Approve.index()]
                        * drift[k]
                        * weight
                        * recurse(kind, s, config, next, t + 1);
                }
            }
            instantaneous + continuation
        }
    }
}
