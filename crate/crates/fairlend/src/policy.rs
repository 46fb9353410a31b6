//! Tabular softmax decision policy.
//!
//! The policy is a logit table indexed by (group, score, decision). Action
//! probabilities come from a two-way softmax per (group, score) slice, so
//! log-probability gradients are exact and closed form. The always-deny
//! baseline used by the effect decomposition lives here too.

use rand::Rng;

use crate::env::{Decision, Group};
use crate::error::{Error, Result};

/// Differentiable policy parameters: one logit per (group, score, decision).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    num_levels: usize,
    logits: Vec<f64>,
}

impl PolicyParams {
    /// All-zero logits: the uniform policy.
    pub fn zeros(num_levels: usize) -> PolicyParams {
        PolicyParams {
            num_levels,
            logits: vec![0.0; 2 * num_levels * 2],
        }
    }

    pub fn from_logits(num_levels: usize, logits: Vec<f64>) -> Result<PolicyParams> {
        if logits.len() != 2 * num_levels * 2 {
            return Err(Error::Config(format!(
                "expected {} logits for {} levels, got {}",
                2 * num_levels * 2,
                num_levels,
                logits.len()
            )));
        }
        if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite logit {bad}")));
        }
        Ok(PolicyParams { num_levels, logits })
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn table_len(&self) -> usize {
        self.logits.len()
    }

    /// Flat index of the (group, score, decision) cell.
    pub fn index_of(&self, s: Group, score: usize, d: Decision) -> usize {
        debug_assert!(score >= 1 && score <= self.num_levels);
        (s.index() * self.num_levels + (score - 1)) * 2 + d.index()
    }

    pub fn logit(&self, s: Group, score: usize, d: Decision) -> f64 {
        self.logits[self.index_of(s, score, d)]
    }

    pub fn set_logit(&mut self, s: Group, score: usize, d: Decision, value: f64) {
        let idx = self.index_of(s, score, d);
        self.logits[idx] = value;
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// In-place gradient-ascent step `logits += scale * grad`.
    pub fn ascend(&mut self, grad: &[f64], scale: f64) {
        debug_assert_eq!(grad.len(), self.logits.len());
        for (l, g) in self.logits.iter_mut().zip(grad) {
            *l += scale * g;
        }
    }

    /// Convenience accessor for the approval probability at (score, group).
    pub fn approve_prob(&self, score: usize, s: Group) -> f64 {
        action_probabilities(self, score, s)[Decision::Approve.index()]
    }

    /// Plain-text checkpoint: one row per (group, score) with both logits.
    pub fn to_table_string(&self) -> String {
        let mut out = String::from("# group score deny approve\n");
        for s in Group::BOTH {
            for score in 1..=self.num_levels {
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    s.label(),
                    score,
                    self.logit(s, score, Decision::Deny),
                    self.logit(s, score, Decision::Approve),
                ));
            }
        }
        out
    }

    pub fn from_table_string(text: &str) -> Result<PolicyParams> {
        let mut rows: Vec<(Group, usize, f64, f64)> = Vec::new();
        let mut max_score = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    "policy table",
                    format!("line {}: expected 4 fields, got {}", lineno + 1, fields.len()),
                ));
            }
            let group = Group::from_label(fields[0]).ok_or_else(|| {
                Error::parse(
                    "policy table",
                    format!("line {}: unknown group {:?}", lineno + 1, fields[0]),
                )
            })?;
            let score: usize = fields[1].parse().map_err(|e| {
                Error::parse("policy table", format!("line {}: bad score: {e}", lineno + 1))
            })?;
            let deny: f64 = fields[2].parse().map_err(|e| {
                Error::parse("policy table", format!("line {}: bad logit: {e}", lineno + 1))
            })?;
            let approve: f64 = fields[3].parse().map_err(|e| {
                Error::parse("policy table", format!("line {}: bad logit: {e}", lineno + 1))
            })?;
            if !deny.is_finite() || !approve.is_finite() {
                return Err(Error::parse(
                    "policy table",
                    format!("line {}: non-finite logit", lineno + 1),
                ));
            }
            max_score = max_score.max(score);
            rows.push((group, score, deny, approve));
        }
        if max_score == 0 {
            return Err(Error::parse("policy table", "no data rows".to_string()));
        }
        let mut params = PolicyParams::zeros(max_score);
        let mut seen = vec![false; 2 * max_score];
        for (group, score, deny, approve) in rows {
            if score < 1 || score > max_score {
                return Err(Error::parse(
                    "policy table",
                    format!("score {score} out of range 1..={max_score}"),
                ));
            }
            let slot = group.index() * max_score + (score - 1);
            if seen[slot] {
                return Err(Error::parse(
                    "policy table",
                    format!("duplicate row for ({}, {score})", group.label()),
                ));
            }
            seen[slot] = true;
            params.set_logit(group, score, Decision::Deny, deny);
            params.set_logit(group, score, Decision::Approve, approve);
        }
        if let Some(slot) = seen.iter().position(|&v| !v) {
            let group = if slot < max_score { "plus" } else { "minus" };
            let score = slot % max_score + 1;
            return Err(Error::parse(
                "policy table",
                format!("missing row for ({group}, {score})"),
            ));
        }
        Ok(params)
    }
}

/// Which decision mechanism drives a trajectory in the effect analysis.
#[derive(Debug, Clone)]
pub enum PolicyKind {
    /// The behavior policy itself.
    Behavior(PolicyParams),
    /// The always-deny baseline.
    BaselinePi0,
    /// Transitions follow the carried behavior parameters while each
    /// step's gain is attributed as if the decision had been a denial.
    VirtualPs(PolicyParams),
}

fn softmax_pair(deny_logit: f64, approve_logit: f64) -> [f64; 2] {
    // Max subtraction for overflow safety; the smaller probability is
    // computed directly and the larger as its complement, so the pair
    // sums to exactly 1.
    let m = deny_logit.max(approve_logit);
    let e0 = (deny_logit - m).exp();
    let e1 = (approve_logit - m).exp();
    let z = e0 + e1;
    if e0 <= e1 {
        let p0 = e0 / z;
        [p0, 1.0 - p0]
    } else {
        let p1 = e1 / z;
        [1.0 - p1, p1]
    }
}

/// Action distribution (P(deny), P(approve)) at a (score, group) slice.
pub fn action_probabilities(params: &PolicyParams, score: usize, s: Group) -> [f64; 2] {
    softmax_pair(
        params.logit(s, score, Decision::Deny),
        params.logit(s, score, Decision::Approve),
    )
}

/// The always-deny baseline distribution. Ignores every parameter.
pub fn baseline_probabilities(_score: usize, _s: Group) -> [f64; 2] {
    [1.0, 0.0]
}

/// Exact gradient of `ln pi(d | score, s)` with respect to every logit.
/// Zero outside the queried (group, score) slice; on the slice it is the
/// indicator of `d` minus the softmax.
pub fn log_prob_gradient(
    params: &PolicyParams,
    score: usize,
    s: Group,
    d: Decision,
) -> Vec<f64> {
    let mut grad = vec![0.0; params.table_len()];
    let probs = action_probabilities(params, score, s);
    for k in Decision::BOTH {
        let indicator = if k == d { 1.0 } else { 0.0 };
        grad[params.index_of(s, score, k)] = indicator - probs[k.index()];
    }
    grad
}

/// Draw a decision from the policy at (score, group).
pub fn sample_action(
    rng: &mut impl Rng,
    params: &PolicyParams,
    score: usize,
    s: Group,
) -> Decision {
    let probs = action_probabilities(params, score, s);
    if rng.random::<f64>() < probs[Decision::Approve.index()] {
        Decision::Approve
    } else {
        Decision::Deny
    }
}
