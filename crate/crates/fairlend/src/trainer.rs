//! Constrained proximal policy optimization on the lending MDP.
//!
//! The optimizer ascends a penalized surrogate: importance-weighted
//! advantages for utility, a KL penalty that keeps updates near the
//! collection policy, a squared penalty on the qualification-gain parity,
//! and an optional benefit-fairness penalty. Two estimation modes are
//! supported. In oracle mode the MDP is treated as known: advantages come
//! from exact reward value tables and the parity gradient is the exact
//! closed form. In sampled mode everything is estimated from the collected
//! batch through importance ratios.
//!
//! Diagnostics recorded per iteration are always exact, whichever mode
//! drives the updates.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::analysis::{
    decompose_with_epsilon, value_behavior, visitation, DecompositionReport, ValueTables,
    DEFAULT_BENEFIT_EPSILON,
};
use crate::counterfactual::baseline_gap;
use crate::env::{
    expected_reward, sample_individual, sample_step, Decision, EnvConfig, Group, TransitionKernel,
};
use crate::error::{Error, Result};
use crate::policy::{action_probabilities, sample_action, PolicyParams};

/// Which penalties are active during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    /// Utility and KL penalty only.
    Ppo,
    /// Adds the squared qualification-gain-parity penalty.
    PpoC,
    /// Adds the benefit-fairness penalty on top of the parity penalty.
    PpoCb,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Ppo, Algo::PpoC, Algo::PpoCb];

    pub fn label(self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::PpoC => "ppo-c",
            Algo::PpoCb => "ppo-cb",
        }
    }

    pub fn parse(text: &str) -> Option<Algo> {
        match text {
            "ppo" => Some(Algo::Ppo),
            "ppo-c" => Some(Algo::PpoC),
            "ppo-cb" => Some(Algo::PpoCb),
            _ => None,
        }
    }
}

/// How advantages and the parity gradient are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Exact dynamic programming on the known MDP.
    Oracle,
    /// Empirical estimates from the collected batch.
    Sampled,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::Sampled => "sampled",
        }
    }

    pub fn parse(text: &str) -> Option<Mode> {
        match text {
            "oracle" => Some(Mode::Oracle),
            "sampled" => Some(Mode::Sampled),
            _ => None,
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub algo: Algo,
    pub mode: Mode,
    /// Weight of the KL penalty.
    pub beta_kl: f64,
    /// Weight of the squared parity penalty.
    pub beta_c: f64,
    /// Weight of the benefit-fairness penalty.
    pub beta_lambda: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub minibatch_size: usize,
    pub epochs_per_batch: usize,
    /// Similarity radius of the benefit-fairness penalty.
    pub epsilon: f64,
    /// Fold the baseline qualification gap into the parity constraint.
    pub adjusted_constraint: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            algo: Algo::Ppo,
            mode: Mode::Oracle,
            beta_kl: 10.0,
            beta_c: 1.0,
            beta_lambda: 0.0,
            learning_rate: 0.05,
            iterations: 300,
            episodes_per_iter: 200,
            minibatch_size: 256,
            epochs_per_batch: 4,
            epsilon: DEFAULT_BENEFIT_EPSILON,
            adjusted_constraint: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("beta_kl", self.beta_kl),
            ("beta_c", self.beta_c),
            ("beta_lambda", self.beta_lambda),
            ("learning_rate", self.learning_rate),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be a nonnegative finite number, got {value}"
                )));
            }
        }
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.episodes_per_iter < 1 {
            return Err(Error::Config("episodes_per_iter must be at least 1".into()));
        }
        if self.minibatch_size < 1 {
            return Err(Error::Config("minibatch_size must be at least 1".into()));
        }
        if self.epochs_per_batch < 1 {
            return Err(Error::Config("epochs_per_batch must be at least 1".into()));
        }
        Ok(())
    }

    /// Penalty weights actually applied, after masking by algorithm.
    pub fn effective_betas(&self) -> (f64, f64, f64) {
        match self.algo {
            Algo::Ppo => (self.beta_kl, 0.0, 0.0),
            Algo::PpoC => (self.beta_kl, self.beta_c, 0.0),
            Algo::PpoCb => (self.beta_kl, self.beta_c, self.beta_lambda),
        }
    }
}

/// One policy interaction inside a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    /// 1-based timestep within the episode.
    pub t: usize,
    pub group: Group,
    pub score: usize,
    pub decision: Decision,
    pub reward: f64,
    pub gain: f64,
    /// Probability the collection policy assigned to the taken decision.
    pub old_action_prob: f64,
    /// Undiscounted sum of rewards from this step to episode end.
    pub reward_to_go: f64,
    /// Undiscounted sum of gains from this step to episode end.
    pub gain_to_go: f64,
}

/// A batch of sampled trajectories, flattened to per-step records.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub horizon: usize,
    pub num_episodes: usize,
    pub records: Vec<StepRecord>,
}

impl RolloutBatch {
    pub fn mean_episode_reward(&self) -> f64 {
        let total: f64 = self.records.iter().map(|r| r.reward).sum();
        total / self.num_episodes as f64
    }

    pub fn group_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for rec in &self.records {
            counts[rec.group.index()] += 1;
        }
        counts
    }

    /// Per-group empirical score frequencies over all records. A group
    /// with no records yields an all-zero vector.
    pub fn empirical_state_dists(&self, num_levels: usize) -> [Vec<f64>; 2] {
        let mut counts = [vec![0.0; num_levels], vec![0.0; num_levels]];
        let mut totals = [0.0; 2];
        for rec in &self.records {
            counts[rec.group.index()][rec.score - 1] += 1.0;
            totals[rec.group.index()] += 1.0;
        }
        for s in Group::BOTH {
            let i = s.index();
            if totals[i] > 0.0 {
                for v in counts[i].iter_mut() {
                    *v /= totals[i];
                }
            }
        }
        counts
    }
}

/// Roll out complete episodes under the given policy and attach
/// returns-to-go for both reward and gain.
pub fn collect_rollouts(
    rng: &mut impl Rng,
    params: &PolicyParams,
    config: &EnvConfig,
    n_episodes: usize,
) -> RolloutBatch {
    assert!(n_episodes >= 1, "at least one episode per batch");
    let horizon = config.horizon;
    let mut records = Vec::with_capacity(n_episodes * horizon);
    for episode in 0..n_episodes {
        let mut ind = sample_individual(rng, config);
        let start = records.len();
        for t in 1..=horizon {
            let probs = action_probabilities(params, ind.score, ind.group);
            let decision = sample_action(rng, params, ind.score, ind.group);
            let (next, reward, gain) = sample_step(rng, &ind, decision, config);
            records.push(StepRecord {
                episode,
                t,
                group: ind.group,
                score: ind.score,
                decision,
                reward,
                gain,
                old_action_prob: probs[decision.index()],
                reward_to_go: 0.0,
                gain_to_go: 0.0,
            });
            ind = next;
        }
        let mut reward_acc = 0.0;
        let mut gain_acc = 0.0;
        for rec in records[start..].iter_mut().rev() {
            reward_acc += rec.reward;
            gain_acc += rec.gain;
            rec.reward_to_go = reward_acc;
            rec.gain_to_go = gain_acc;
        }
    }
    RolloutBatch {
        horizon,
        num_episodes: n_episodes,
        records,
    }
}

/// Reward-based value tables for one group: the same backward induction
/// as the gain analysis with the bank profit as the step payoff.
fn reward_value_tables(params: &PolicyParams, s: Group, config: &EnvConfig) -> ValueTables {
    let kernel = TransitionKernel::from_config(config);
    let c = config.num_levels;
    let t_max = config.horizon;
    let mut v = vec![0.0; (t_max + 1) * c];
    let mut q = vec![0.0; t_max * c * 2];
    for t in (1..=t_max).rev() {
        for x in 1..=c {
            let probs = action_probabilities(params, x, s);
            let mut value = 0.0;
            for d in Decision::BOTH {
                let mut continuation = 0.0;
                for (i, &p) in kernel.row(s, x, d).iter().enumerate() {
                    continuation += p * v[t * c + i];
                }
                let q_val = expected_reward(x, d, s, config) + continuation;
                q[((t - 1) * c + (x - 1)) * 2 + d.index()] = q_val;
                value += probs[d.index()] * q_val;
            }
            v[(t - 1) * c + (x - 1)] = value;
        }
    }
    ValueTables::from_parts(t_max, c, v, q)
}

/// Exact expected total bank profit per episode under a policy.
pub fn expected_utility(params: &PolicyParams, config: &EnvConfig) -> f64 {
    let priors = config.group_probs();
    Group::BOTH
        .iter()
        .map(|&s| {
            priors[s.index()]
                * reward_value_tables(params, s, config).expected_initial(config.init_dist(s))
        })
        .sum()
}

/// Per-record advantage estimates for the utility surrogate.
///
/// Oracle mode reads exact reward Q minus V tables; sampled mode subtracts
/// an empirical per-(timestep, score, group) baseline from the
/// returns-to-go.
pub fn estimate_advantages(
    batch: &RolloutBatch,
    params: &PolicyParams,
    config: &EnvConfig,
    mode: Mode,
) -> Vec<f64> {
    match mode {
        Mode::Oracle => {
            let tables: [ValueTables; 2] = [
                reward_value_tables(params, Group::Plus, config),
                reward_value_tables(params, Group::Minus, config),
            ];
            batch
                .records
                .iter()
                .map(|rec| {
                    let t = &tables[rec.group.index()];
                    t.q(rec.t, rec.score, rec.decision) - t.v(rec.t, rec.score)
                })
                .collect()
        }
        Mode::Sampled => {
            let mut cells: HashMap<(usize, usize, usize), (f64, usize)> = HashMap::new();
            for rec in &batch.records {
                let cell = cells
                    .entry((rec.t, rec.score, rec.group.index()))
                    .or_insert((0.0, 0));
                cell.0 += rec.reward_to_go;
                cell.1 += 1;
            }
            batch
                .records
                .iter()
                .map(|rec| {
                    let (sum, count) = cells[&(rec.t, rec.score, rec.group.index())];
                    rec.reward_to_go - sum / count as f64
                })
                .collect()
        }
    }
}

/// Importance-weighted empirical parity constraint: the gap between the
/// groups' mean ratio-weighted gain returns-to-go.
pub fn constraint_estimate(
    batch: &RolloutBatch,
    params: &PolicyParams,
    old_params: &PolicyParams,
) -> Result<f64> {
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for rec in &batch.records {
        let new_p = action_probabilities(params, rec.score, rec.group)[rec.decision.index()];
        let old_p = action_probabilities(old_params, rec.score, rec.group)[rec.decision.index()];
        sums[rec.group.index()] += new_p / old_p * rec.gain_to_go;
        counts[rec.group.index()] += 1;
    }
    for s in Group::BOTH {
        if counts[s.index()] == 0 {
            return Err(Error::MissingGroup(s.label()));
        }
    }
    Ok(sums[0] / counts[0] as f64 - sums[1] / counts[1] as f64)
}

/// Exact expectation of [`constraint_estimate`] at unit ratios: the
/// occupancy-weighted time average of the gain value function, differenced
/// across groups. This is the dynamic-programming target the sampled
/// estimator converges to; it weighs later gains more heavily than the
/// plain parity and therefore differs from it in general.
pub fn expected_constraint_estimate(params: &PolicyParams, config: &EnvConfig) -> f64 {
    let horizon = config.horizon as f64;
    let mut means = [0.0; 2];
    for s in Group::BOTH {
        let tables = value_behavior(params, s, config);
        let visits = visitation(params, s, config, config.init_dist(s));
        let mut acc = 0.0;
        for t in 1..=config.horizon {
            for x in 1..=config.num_levels {
                acc += visits.occupancy(t, x) * tables.v(t, x);
            }
        }
        means[s.index()] = acc / horizon;
    }
    means[0] - means[1]
}

/// Exact gradient of the squared parity (plus an optional constant
/// offset) with respect to the policy logits, together with the signed
/// constraint value.
fn constraint_gradient_with_offset(
    params: &PolicyParams,
    config: &EnvConfig,
    offset: f64,
) -> (f64, Vec<f64>) {
    let mut grad_c = vec![0.0; params.table_len()];
    let mut expected = [0.0; 2];
    for s in Group::BOTH {
        let tables = value_behavior(params, s, config);
        let visits = visitation(params, s, config, config.init_dist(s));
        expected[s.index()] = tables.expected_initial(config.init_dist(s));
        let sign = if s == Group::Plus { 1.0 } else { -1.0 };
        for t in 1..=config.horizon {
            for x in 1..=config.num_levels {
                let weight = visits.occupancy(t, x);
                if weight == 0.0 {
                    continue;
                }
                let probs = action_probabilities(params, x, s);
                for k in Decision::BOTH {
                    let mut acc = 0.0;
                    for d in Decision::BOTH {
                        let indicator = if d == k { 1.0 } else { 0.0 };
                        acc += probs[d.index()]
                            * (indicator - probs[k.index()])
                            * tables.q(t, x, d);
                    }
                    grad_c[params.index_of(s, x, k)] += sign * weight * acc;
                }
            }
        }
    }
    let constraint = offset + expected[0] - expected[1];
    let alpha = 2.0 * constraint;
    (constraint, grad_c.into_iter().map(|g| alpha * g).collect())
}

/// Exact gradient of the squared qualification-gain parity with respect
/// to every logit: the parity times the visitation-weighted score-function
/// form of the parity gradient, doubled.
pub fn constraint_gradient_oracle(params: &PolicyParams, config: &EnvConfig) -> Vec<f64> {
    constraint_gradient_with_offset(params, config, 0.0).1
}

/// Benefit-fairness penalty and its exact logit gradient for fixed state
/// distributions.
fn lambda_value_and_grad(
    params: &PolicyParams,
    dists: &[Vec<f64>; 2],
    benefits: &[Vec<f64>; 2],
    epsilon: f64,
) -> (f64, Vec<f64>) {
    let c = params.num_levels();
    let approve_plus: Vec<f64> = (1..=c).map(|x| params.approve_prob(x, Group::Plus)).collect();
    let approve_minus: Vec<f64> = (1..=c)
        .map(|x| params.approve_prob(x, Group::Minus))
        .collect();
    let mut value = 0.0;
    let mut coeff_plus = vec![0.0; c];
    let mut coeff_minus = vec![0.0; c];
    for x in 0..c {
        let wx = dists[0][x];
        if wx == 0.0 {
            continue;
        }
        for y in 0..c {
            let w = wx * dists[1][y];
            if w == 0.0 {
                continue;
            }
            let inv = epsilon / (epsilon + (benefits[0][x] - benefits[1][y]).abs());
            let diff = approve_plus[x] - approve_minus[y];
            value += w * inv * diff.abs();
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            coeff_plus[x] += w * inv * sign;
            coeff_minus[y] -= w * inv * sign;
        }
    }
    let mut grad = vec![0.0; params.table_len()];
    for x in 0..c {
        let slope = approve_plus[x] * (1.0 - approve_plus[x]);
        grad[params.index_of(Group::Plus, x + 1, Decision::Approve)] += coeff_plus[x] * slope;
        grad[params.index_of(Group::Plus, x + 1, Decision::Deny)] -= coeff_plus[x] * slope;
        let slope = approve_minus[x] * (1.0 - approve_minus[x]);
        grad[params.index_of(Group::Minus, x + 1, Decision::Approve)] += coeff_minus[x] * slope;
        grad[params.index_of(Group::Minus, x + 1, Decision::Deny)] -= coeff_minus[x] * slope;
    }
    (value, grad)
}

/// Surrogate terms evaluated on the full batch after an update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiagnostics {
    /// Importance-weighted advantage surrogate.
    pub l_util: f64,
    /// Mean KL from the collection policy to the updated policy.
    pub l_kl: f64,
    /// Empirical parity constraint (NaN if a group never appeared).
    pub c_hat: f64,
    /// Benefit-fairness penalty at the distributions used for training.
    pub lambda_term: f64,
}

/// Reconstruct a full action distribution from the probability of one
/// decision. Both KL operands go through this, so the divergence is
/// exactly zero whenever the probabilities of the taken action agree.
fn complement_pair(taken: Decision, p_taken: f64) -> [f64; 2] {
    match taken {
        Decision::Deny => [p_taken, 1.0 - p_taken],
        Decision::Approve => [1.0 - p_taken, p_taken],
    }
}

fn kl_divergence(p_old: &[f64; 2], p_new: &[f64; 2]) -> f64 {
    let mut total = 0.0;
    for k in 0..2 {
        if p_old[k] > 0.0 {
            total += p_old[k] * (p_old[k].ln() - p_new[k].ln());
        }
    }
    total
}

fn ensure_finite(term: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteObjective { term, value })
    }
}

/// One optimization phase on a collected batch: shuffled minibatch ascent
/// on the penalized surrogate for the configured number of epochs.
/// Returns the updated parameters and full-batch diagnostics.
pub fn ppo_update(
    rng: &mut impl Rng,
    params: &PolicyParams,
    batch: &RolloutBatch,
    train_cfg: &TrainConfig,
    config: &EnvConfig,
) -> Result<(PolicyParams, UpdateDiagnostics)> {
    let (beta_kl, beta_c, beta_lambda) = train_cfg.effective_betas();
    let old = params.clone();
    let advantages = estimate_advantages(batch, &old, config, train_cfg.mode);
    let offset = if train_cfg.adjusted_constraint {
        baseline_gap(config)
    } else {
        0.0
    };
    let c = config.num_levels;
    let benefits: [Vec<f64>; 2] = [
        (1..=c)
            .map(|x| crate::analysis::benefit(x, Group::Plus, config))
            .collect(),
        (1..=c)
            .map(|x| crate::analysis::benefit(x, Group::Minus, config))
            .collect(),
    ];
    // State distributions the benefit-fairness penalty is weighted by:
    // exact occupancy under the collection policy in oracle mode, the
    // batch's empirical score frequencies in sampled mode.
    let lambda_dists: [Vec<f64>; 2] = match train_cfg.mode {
        Mode::Oracle => [
            visitation(&old, Group::Plus, config, config.init_dist(Group::Plus)).time_averaged(),
            visitation(&old, Group::Minus, config, config.init_dist(Group::Minus))
                .time_averaged(),
        ],
        Mode::Sampled => batch.empirical_state_dists(c),
    };

    let mut theta = params.clone();
    let mut order: Vec<usize> = (0..batch.records.len()).collect();
    for _ in 0..train_cfg.epochs_per_batch {
        order.shuffle(rng);
        for chunk in order.chunks(train_cfg.minibatch_size) {
            let inv_n = 1.0 / chunk.len() as f64;
            let mut grad = vec![0.0; theta.table_len()];
            let mut l_util = 0.0;
            let mut l_kl = 0.0;
            let mut group_sums = [0.0; 2];
            let mut group_grads: Option<[Vec<f64>; 2]> = if beta_c > 0.0
                && train_cfg.mode == Mode::Sampled
            {
                Some([vec![0.0; theta.table_len()], vec![0.0; theta.table_len()]])
            } else {
                None
            };
            let mut group_counts = [0usize; 2];
            for &i in chunk {
                let rec = &batch.records[i];
                let probs = action_probabilities(&theta, rec.score, rec.group);
                let ratio = probs[rec.decision.index()] / rec.old_action_prob;
                let adv = advantages[i];
                l_util += inv_n * ratio * adv;
                let p_old = complement_pair(rec.decision, rec.old_action_prob);
                let p_new = complement_pair(rec.decision, probs[rec.decision.index()]);
                l_kl += inv_n * kl_divergence(&p_old, &p_new);
                for k in Decision::BOTH {
                    let idx = theta.index_of(rec.group, rec.score, k);
                    let score_fn = (k == rec.decision) as u8 as f64 - probs[k.index()];
                    grad[idx] += inv_n * ratio * adv * score_fn;
                    if beta_kl > 0.0 {
                        grad[idx] -= beta_kl * inv_n * (p_new[k.index()] - p_old[k.index()]);
                    }
                }
                group_counts[rec.group.index()] += 1;
                group_sums[rec.group.index()] += ratio * rec.gain_to_go;
                if let Some(ref mut per_group) = group_grads {
                    let table = &mut per_group[rec.group.index()];
                    for k in Decision::BOTH {
                        let idx = theta.index_of(rec.group, rec.score, k);
                        let score_fn = (k == rec.decision) as u8 as f64 - probs[k.index()];
                        table[idx] += ratio * rec.gain_to_go * score_fn;
                    }
                }
            }
            ensure_finite("util", l_util)?;
            ensure_finite("kl", l_kl)?;

            if beta_c > 0.0 {
                match train_cfg.mode {
                    Mode::Sampled => {
                        for s in Group::BOTH {
                            if group_counts[s.index()] == 0 {
                                return Err(Error::MissingGroup(s.label()));
                            }
                        }
                        let n_plus = group_counts[0] as f64;
                        let n_minus = group_counts[1] as f64;
                        let c_hat = offset + group_sums[0] / n_plus - group_sums[1] / n_minus;
                        ensure_finite("constraint", c_hat)?;
                        let per_group = group_grads.as_ref().expect("allocated for sampled mode");
                        for j in 0..grad.len() {
                            let d_c = per_group[0][j] / n_plus - per_group[1][j] / n_minus;
                            grad[j] -= beta_c * 2.0 * c_hat * d_c;
                        }
                    }
                    Mode::Oracle => {
                        let (c_val, c_grad) =
                            constraint_gradient_with_offset(&theta, config, offset);
                        ensure_finite("constraint", c_val)?;
                        for (g, d) in grad.iter_mut().zip(&c_grad) {
                            *g -= beta_c * d;
                        }
                    }
                }
            }

            if beta_lambda > 0.0 {
                let (lam, lam_grad) =
                    lambda_value_and_grad(&theta, &lambda_dists, &benefits, train_cfg.epsilon);
                ensure_finite("lambda", lam)?;
                for (g, d) in grad.iter_mut().zip(&lam_grad) {
                    *g -= beta_lambda * d;
                }
            }

            theta.ascend(&grad, train_cfg.learning_rate);
        }
    }

    // Full-batch diagnostics at the updated parameters.
    let mut l_util = 0.0;
    let mut l_kl = 0.0;
    let inv_n = 1.0 / batch.records.len() as f64;
    for (i, rec) in batch.records.iter().enumerate() {
        let probs = action_probabilities(&theta, rec.score, rec.group);
        let p_taken = probs[rec.decision.index()];
        l_util += inv_n * p_taken / rec.old_action_prob * advantages[i];
        l_kl += inv_n
            * kl_divergence(
                &complement_pair(rec.decision, rec.old_action_prob),
                &complement_pair(rec.decision, p_taken),
            );
    }
    let c_hat = match constraint_estimate(batch, &theta, &old) {
        Ok(v) => offset + v,
        Err(_) => f64::NAN,
    };
    let (lambda_term, _) =
        lambda_value_and_grad(&theta, &lambda_dists, &benefits, train_cfg.epsilon);
    Ok((
        theta,
        UpdateDiagnostics {
            l_util,
            l_kl,
            c_hat,
            lambda_term,
        },
    ))
}

/// One row of training telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Mean episode reward of the collection batch.
    pub utility: f64,
    /// Exact effect decomposition of the updated policy.
    pub report: DecompositionReport,
    pub l_util: f64,
    pub l_kl: f64,
    pub c_hat: f64,
    pub lambda_term: f64,
    /// Baseline-adjusted parity of the updated policy.
    pub adjusted_c_pi: f64,
}

/// Telemetry for a full run plus the trained policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
    pub final_params: PolicyParams,
}

/// Run the full collect / estimate / update loop.
pub fn train(config: &EnvConfig, train_cfg: &TrainConfig, rng: &mut impl Rng) -> Result<TrainHistory> {
    train_with_observer(config, train_cfg, rng, |_, _| Ok(()))
}

/// [`train`] with a per-iteration callback, so callers can stream rows to
/// disk as they are produced.
pub fn train_with_observer(
    config: &EnvConfig,
    train_cfg: &TrainConfig,
    rng: &mut impl Rng,
    mut observer: impl FnMut(usize, &IterationRecord) -> Result<()>,
) -> Result<TrainHistory> {
    config.validate()?;
    train_cfg.validate()?;
    let gap = baseline_gap(config);
    let mut params = PolicyParams::zeros(config.num_levels);
    let mut records = Vec::with_capacity(train_cfg.iterations);
    for iteration in 0..train_cfg.iterations {
        let batch = collect_rollouts(rng, &params, config, train_cfg.episodes_per_iter);
        let utility = batch.mean_episode_reward();
        let (updated, diag) = ppo_update(rng, &params, &batch, train_cfg, config)?;
        params = updated;
        let report = decompose_with_epsilon(&params, config, train_cfg.epsilon)?;
        let record = IterationRecord {
            utility,
            adjusted_c_pi: gap + report.c_pi,
            report,
            l_util: diag.l_util,
            l_kl: diag.l_kl,
            c_hat: diag.c_hat,
            lambda_term: diag.lambda_term,
        };
        observer(iteration, &record)?;
        records.push(record);
    }
    Ok(TrainHistory {
        records,
        final_params: params,
    })
}
