//! Discrete-time lending environment.
//!
//! A population of individuals, each carrying a sensitive group, a credit
//! score on the levels `1..=C`, a hidden repayment ability and a hidden
//! credit drift, faces a bank that approves or denies one loan per step.
//! Approved loans move the score up on repayment and down on default;
//! denied applications leave it to drift alone. Scores are clamped to the
//! level range. Each transition is credited with a qualification gain that
//! weighs movement near the top of the scale more heavily (cubic scaling),
//! and the bank collects a profit or loss per decision.
//!
//! All operations here are pure functions of the configuration, the inputs
//! and an explicit RNG, so callers own determinism end to end.

use rand::Rng;

use crate::error::{Error, Result};

/// Offsets an individual's score may drift by in one step, independent of
/// the lending decision.
pub const DRIFT_SUPPORT: [i64; 3] = [-1, 0, 1];

/// Sensitive group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    /// The advantaged group (written `plus` in config and CSV files).
    Plus,
    /// The disadvantaged group.
    Minus,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Plus, Group::Minus];

    pub fn index(self) -> usize {
        match self {
            Group::Plus => 0,
            Group::Minus => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::Plus => "plus",
            Group::Minus => "minus",
        }
    }

    pub fn from_label(label: &str) -> Option<Group> {
        match label {
            "plus" => Some(Group::Plus),
            "minus" => Some(Group::Minus),
            _ => None,
        }
    }

    /// The other group.
    pub fn other(self) -> Group {
        match self {
            Group::Plus => Group::Minus,
            Group::Minus => Group::Plus,
        }
    }
}

/// Loan decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Deny,
    Approve,
}

impl Decision {
    pub const BOTH: [Decision; 2] = [Decision::Deny, Decision::Approve];

    pub fn index(self) -> usize {
        match self {
            Decision::Deny => 0,
            Decision::Approve => 1,
        }
    }

    pub fn from_index(idx: usize) -> Decision {
        if idx == 0 {
            Decision::Deny
        } else {
            Decision::Approve
        }
    }
}

/// Per-group environment tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams {
    /// Distribution of the initial credit score over `1..=C`.
    pub init_score_dist: Vec<f64>,
    /// Probability of repaying an approved loan, per score level.
    pub repay_prob: Vec<f64>,
    /// Distribution of the decision-independent drift over `{-1, 0, +1}`.
    pub drift_dist: [f64; 3],
}

/// Full parameterization of a lending environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Number of credit-score levels C; scores are integers `1..=C`.
    pub num_levels: usize,
    /// Probability that a sampled individual belongs to the plus group.
    pub group_prior: f64,
    /// Per-group tables, indexed by [`Group::index`].
    pub groups: [GroupParams; 2],
    /// Bank profit on a repaid loan.
    pub reward_success: f64,
    /// Bank loss magnitude on a defaulted loan (applied negatively).
    pub reward_default: f64,
    /// Episode length T.
    pub horizon: usize,
}

const PROB_SUM_TOL: f64 = 1e-12;

fn check_distribution(name: &str, dist: &[f64]) -> Result<()> {
    for (i, &p) in dist.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::Config(format!(
                "{name}[{i}] = {p} is not a probability in [0, 1]"
            )));
        }
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::Config(format!(
            "{name} sums to {sum}, expected 1 within {PROB_SUM_TOL:e}"
        )));
    }
    Ok(())
}

impl EnvConfig {
    /// Validate every structural invariant. Loaders call this before any
    /// computation touches the config.
    pub fn validate(&self) -> Result<()> {
        if self.num_levels < 2 {
            return Err(Error::Config(format!(
                "num_levels = {} but at least 2 levels are required",
                self.num_levels
            )));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.group_prior) || !self.group_prior.is_finite() {
            return Err(Error::Config(format!(
                "group_prior = {} is not a probability in [0, 1]",
                self.group_prior
            )));
        }
        if !self.reward_success.is_finite() || !self.reward_default.is_finite() {
            return Err(Error::Config("reward values must be finite".into()));
        }
        for s in Group::BOTH {
            let g = self.group(s);
            let label = s.label();
            if g.init_score_dist.len() != self.num_levels {
                return Err(Error::Config(format!(
                    "{label}.init_score_dist has {} entries, expected num_levels = {}",
                    g.init_score_dist.len(),
                    self.num_levels
                )));
            }
            if g.repay_prob.len() != self.num_levels {
                return Err(Error::Config(format!(
                    "{label}.repay_prob has {} entries, expected num_levels = {}",
                    g.repay_prob.len(),
                    self.num_levels
                )));
            }
            check_distribution(&format!("{label}.init_score_dist"), &g.init_score_dist)?;
            check_distribution(&format!("{label}.drift_dist"), &g.drift_dist)?;
            for (i, &p) in g.repay_prob.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(Error::Config(format!(
                        "{label}.repay_prob[{i}] = {p} is not a probability in [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn group(&self, s: Group) -> &GroupParams {
        &self.groups[s.index()]
    }

    pub fn init_dist(&self, s: Group) -> &[f64] {
        &self.group(s).init_score_dist
    }

    /// P(repay | score, group).
    pub fn repay(&self, s: Group, score: usize) -> f64 {
        self.group(s).repay_prob[score - 1]
    }

    pub fn drift(&self, s: Group) -> &[f64; 3] {
        &self.group(s).drift_dist
    }

    /// P(group) as a pair indexed by [`Group::index`].
    pub fn group_probs(&self) -> [f64; 2] {
        [self.group_prior, 1.0 - self.group_prior]
    }

    fn check_score(&self, score: usize) -> Result<()> {
        if score < 1 || score > self.num_levels {
            return Err(Error::ScoreOutOfRange {
                score,
                num_levels: self.num_levels,
            });
        }
        Ok(())
    }
}

/// One member of the population. `drift` and `repays` are latent: the
/// policy never observes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Individual {
    pub group: Group,
    pub score: usize,
    pub drift: i64,
    pub repays: bool,
}

/// Clamp a tentative score into the valid level range.
pub fn clamp_score(value: i64, num_levels: usize) -> usize {
    value.clamp(1, num_levels as i64) as usize
}

/// Deterministic score update: drift always applies, an approved loan adds
/// +1 on repayment and -1 on default, and the result is clamped to
/// `1..=num_levels`.
pub fn next_score(score: usize, d: Decision, drift: i64, repays: bool, num_levels: usize) -> usize {
    let offset = match d {
        Decision::Deny => 0,
        Decision::Approve => {
            if repays {
                1
            } else {
                -1
            }
        }
    };
    clamp_score(score as i64 + drift + offset, num_levels)
}

fn cubic_gain_denominator(num_levels: usize) -> f64 {
    // The largest single-step magnitude |i^3 - j^3| over adjacent levels
    // sits at the top of the scale.
    let c = num_levels as i64;
    (c * c * c - (c - 1) * (c - 1) * (c - 1)) as f64
}

pub(crate) fn gain_value(config: &EnvConfig, score: usize, next: usize) -> f64 {
    let a = score as i64;
    let b = next as i64;
    ((b * b * b - a * a * a) as f64) / cubic_gain_denominator(config.num_levels)
}

/// Qualification gain credited to a transition between score levels.
///
/// Cubic in the levels and normalized so the largest adjacent step has
/// magnitude 1: climbing near the top of the scale counts for more than
/// the same climb near the bottom. Antisymmetric and additive over
/// intermediate levels.
pub fn qualification_gain(score: usize, next: usize, config: &EnvConfig) -> Result<f64> {
    config.check_score(score)?;
    config.check_score(next)?;
    Ok(gain_value(config, score, next))
}

/// Group-accepting variant of [`qualification_gain`]. The shipped gain
/// function does not depend on the group; the parameter is part of the
/// interface so a group-dependent gain can slot in without touching
/// callers.
pub fn qualification_gain_for_group(
    _s: Group,
    score: usize,
    next: usize,
    config: &EnvConfig,
) -> Result<f64> {
    qualification_gain(score, next, config)
}

/// Distribution of the next score given the current score, the decision
/// and the group, marginalized over drift and (for approvals) repayment.
pub fn transition_distribution(
    score: usize,
    d: Decision,
    s: Group,
    config: &EnvConfig,
) -> Result<Vec<f64>> {
    config.check_score(score)?;
    let mut dist = vec![0.0; config.num_levels];
    let drift = config.drift(s);
    match d {
        Decision::Deny => {
            for (k, &offset) in DRIFT_SUPPORT.iter().enumerate() {
                let x = next_score(score, d, offset, false, config.num_levels);
                dist[x - 1] += drift[k];
            }
        }
        Decision::Approve => {
            let p = config.repay(s, score);
            for (k, &offset) in DRIFT_SUPPORT.iter().enumerate() {
                let up = next_score(score, d, offset, true, config.num_levels);
                let down = next_score(score, d, offset, false, config.num_levels);
                dist[up - 1] += p * drift[k];
                dist[down - 1] += (1.0 - p) * drift[k];
            }
        }
    }
    Ok(dist)
}

/// Bank profit for one decision: zero on denial, `reward_success` on a
/// repaid loan, `-reward_default` on a default.
pub fn reward(_score: usize, d: Decision, repays: bool, config: &EnvConfig) -> f64 {
    match d {
        Decision::Deny => 0.0,
        Decision::Approve => {
            if repays {
                config.reward_success
            } else {
                -config.reward_default
            }
        }
    }
}

/// Expected immediate bank profit for a decision at a score, before the
/// repayment outcome is revealed.
pub fn expected_reward(score: usize, d: Decision, s: Group, config: &EnvConfig) -> f64 {
    match d {
        Decision::Deny => 0.0,
        Decision::Approve => {
            let p = config.repay(s, score);
            p * config.reward_success - (1.0 - p) * config.reward_default
        }
    }
}

/// All next-score rows for a config, one per (group, score, decision).
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    num_levels: usize,
    rows: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn from_config(config: &EnvConfig) -> TransitionKernel {
        let c = config.num_levels;
        let mut rows = Vec::with_capacity(2 * 2 * c);
        for s in Group::BOTH {
            for d in Decision::BOTH {
                for x in 1..=c {
                    rows.push(
                        transition_distribution(x, d, s, config)
                            .expect("scores enumerated in range"),
                    );
                }
            }
        }
        TransitionKernel { num_levels: c, rows }
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// Row P(next | score, decision, group) over `1..=C`.
    pub fn row(&self, s: Group, score: usize, d: Decision) -> &[f64] {
        let idx = (s.index() * 2 + d.index()) * self.num_levels + (score - 1);
        &self.rows[idx]
    }
}

pub(crate) fn sample_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave acc marginally below 1; fall back to the last
    // index with positive mass.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Draw a fresh individual: group, then score, then repayment ability,
/// then drift (that order fixes the RNG stream).
pub fn sample_individual(rng: &mut impl Rng, config: &EnvConfig) -> Individual {
    let group = if rng.random::<f64>() < config.group_prior {
        Group::Plus
    } else {
        Group::Minus
    };
    let score = sample_categorical(rng, config.init_dist(group)) + 1;
    let repays = rng.random::<f64>() < config.repay(group, score);
    let drift = DRIFT_SUPPORT[sample_categorical(rng, config.drift(group))];
    Individual {
        group,
        score,
        drift,
        repays,
    }
}

/// Advance one individual by one decision. Returns the successor (with
/// repayment ability and drift redrawn for the new score), the bank's
/// reward, and the qualification gain of the move.
pub fn sample_step(
    rng: &mut impl Rng,
    ind: &Individual,
    d: Decision,
    config: &EnvConfig,
) -> (Individual, f64, f64) {
    let score = next_score(ind.score, d, ind.drift, ind.repays, config.num_levels);
    let r = reward(ind.score, d, ind.repays, config);
    let gain = gain_value(config, ind.score, score);
    let repays = rng.random::<f64>() < config.repay(ind.group, score);
    let drift = DRIFT_SUPPORT[sample_categorical(rng, config.drift(ind.group))];
    let next = Individual {
        group: ind.group,
        score,
        drift,
        repays,
    };
    (next, r, gain)
}
