//! Exact finite-horizon analysis of a policy on a lending environment.
//!
//! Everything here is closed-form dynamic programming on the known MDP:
//! qualification-gain value tables for the behavior policy, the always-deny
//! baseline and the virtual policy that mixes the two, state visitation
//! tables, the three-way effect decomposition of the qualification-gain
//! parity, the per-state benefit of approval, the pairwise benefit-fairness
//! gap, and the Wasserstein-1 distance between score distributions.
//!
//! Value and visitation tables are time indexed; nothing is discounted.

use crate::env::{gain_value, Decision, EnvConfig, Group, TransitionKernel};
use crate::error::{Error, Result};
use crate::policy::{action_probabilities, PolicyKind, PolicyParams};

/// Similarity radius used for the benefit-fairness gap when no explicit
/// value is supplied. A small fraction of the benefit range [-1, 1].
pub const DEFAULT_BENEFIT_EPSILON: f64 = 0.05;

/// Time-indexed state and action values for one (policy kind, group).
///
/// `v` covers timesteps `1..=T+1` with the terminal slice identically
/// zero; `q` covers `1..=T`.
#[derive(Debug, Clone)]
pub struct ValueTables {
    horizon: usize,
    num_levels: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTables {
    pub(crate) fn from_parts(
        horizon: usize,
        num_levels: usize,
        v: Vec<f64>,
        q: Vec<f64>,
    ) -> ValueTables {
        debug_assert_eq!(v.len(), (horizon + 1) * num_levels);
        debug_assert_eq!(q.len(), horizon * num_levels * 2);
        ValueTables {
            horizon,
            num_levels,
            v,
            q,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// V(t, x) for `t` in `1..=T+1` and `x` in `1..=C`.
    pub fn v(&self, t: usize, score: usize) -> f64 {
        debug_assert!(t >= 1 && t <= self.horizon + 1);
        self.v[(t - 1) * self.num_levels + (score - 1)]
    }

    /// Q(t, x, d) for `t` in `1..=T`.
    pub fn q(&self, t: usize, score: usize, d: Decision) -> f64 {
        debug_assert!(t >= 1 && t <= self.horizon);
        self.q[((t - 1) * self.num_levels + (score - 1)) * 2 + d.index()]
    }

    /// Expectation of V(1, x) under an initial score distribution.
    pub fn expected_initial(&self, init: &[f64]) -> f64 {
        debug_assert_eq!(init.len(), self.num_levels);
        init.iter()
            .enumerate()
            .map(|(i, &p)| p * self.v(1, i + 1))
            .sum()
    }
}

/// Occupancy per timestep plus aggregated expected visit counts.
///
/// `occupancy` covers `1..=T+1`; the visit counts `eta` aggregate
/// timesteps `1..=T`, so they sum to the horizon.
#[derive(Debug, Clone)]
pub struct VisitationTable {
    horizon: usize,
    num_levels: usize,
    occupancy: Vec<f64>,
    eta: Vec<f64>,
}

impl VisitationTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// P(x_t = x) for `t` in `1..=T+1`.
    pub fn occupancy(&self, t: usize, score: usize) -> f64 {
        debug_assert!(t >= 1 && t <= self.horizon + 1);
        self.occupancy[(t - 1) * self.num_levels + (score - 1)]
    }

    /// Expected visits to each score over timesteps `1..=T`.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Occupancy slice at episode end (timestep T+1).
    pub fn final_distribution(&self) -> &[f64] {
        &self.occupancy[self.horizon * self.num_levels..]
    }

    /// Visit counts normalized into a distribution (eta / T).
    pub fn time_averaged(&self) -> Vec<f64> {
        self.eta.iter().map(|&e| e / self.horizon as f64).collect()
    }
}

/// The qualification-gain parity and its three effect components, plus the
/// instantaneous fairness readouts evaluated alongside them.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    /// Gain parity: expected cumulative gain gap between the groups.
    pub c_pi: f64,
    /// Direct policy effect.
    pub dpe: f64,
    /// Indirect (delayed) policy effect.
    pub ipe: f64,
    /// Spurious effect attributable to the environment alone.
    pub spe: f64,
    /// Pairwise benefit-fairness gap.
    pub lambda_metric: f64,
    /// Wasserstein-1 distance between the groups' final score
    /// distributions.
    pub wasserstein_gap: f64,
    /// Expected per-step approval rate per group.
    pub loan_rate: [f64; 2],
}

fn kind_probs(kind: &PolicyKind, score: usize, s: Group) -> [f64; 2] {
    match kind {
        PolicyKind::Behavior(p) | PolicyKind::VirtualPs(p) => action_probabilities(p, score, s),
        PolicyKind::BaselinePi0 => [1.0, 0.0],
    }
}

/// Backward induction for one (policy kind, group). The virtual kind
/// attributes each step's gain through the deny row while its continuation
/// mixes decisions like the behavior policy.
fn value_tables_for(kind: &PolicyKind, s: Group, config: &EnvConfig) -> ValueTables {
    let kernel = TransitionKernel::from_config(config);
    let c = config.num_levels;
    let t_max = config.horizon;
    let mut v = vec![0.0; (t_max + 1) * c];
    let mut q = vec![0.0; t_max * c * 2];

    // Expected one-step gain through the deny row, used by the virtual kind.
    let deny_gain: Vec<f64> = (1..=c)
        .map(|x| {
            kernel
                .row(s, x, Decision::Deny)
                .iter()
                .enumerate()
                .map(|(i, &p)| p * gain_value(config, x, i + 1))
                .sum()
        })
        .collect();

    for t in (1..=t_max).rev() {
        for x in 1..=c {
            let probs = kind_probs(kind, x, s);
            let mut value = 0.0;
            for d in Decision::BOTH {
                let row = kernel.row(s, x, d);
                let mut continuation = 0.0;
                let mut step_gain = 0.0;
                for (i, &p) in row.iter().enumerate() {
                    continuation += p * v[t * c + i];
                    step_gain += p * gain_value(config, x, i + 1);
                }
                let inst = match kind {
                    PolicyKind::VirtualPs(_) => deny_gain[x - 1],
                    _ => step_gain,
                };
                let q_val = inst + continuation;
                q[((t - 1) * c + (x - 1)) * 2 + d.index()] = q_val;
                value += probs[d.index()] * q_val;
            }
            v[(t - 1) * c + (x - 1)] = value;
        }
    }

    ValueTables {
        horizon: t_max,
        num_levels: c,
        v,
        q,
    }
}

/// Gain value tables of the behavior policy.
pub fn value_behavior(params: &PolicyParams, s: Group, config: &EnvConfig) -> ValueTables {
    value_tables_for(&PolicyKind::Behavior(params.clone()), s, config)
}

/// Gain value tables of the always-deny baseline. Independent of any
/// policy parameters.
pub fn value_baseline(s: Group, config: &EnvConfig) -> ValueTables {
    value_tables_for(&PolicyKind::BaselinePi0, s, config)
}

/// Gain value tables of the virtual policy: transitions follow the
/// behavior policy while each step's gain is attributed as if denied.
pub fn value_virtual(params: &PolicyParams, s: Group, config: &EnvConfig) -> ValueTables {
    value_tables_for(&PolicyKind::VirtualPs(params.clone()), s, config)
}

pub(crate) fn visitation_for(
    kind: &PolicyKind,
    s: Group,
    config: &EnvConfig,
    init: &[f64],
) -> VisitationTable {
    assert_eq!(
        init.len(),
        config.num_levels,
        "initial distribution must have one entry per score level"
    );
    let sum: f64 = init.iter().sum();
    assert!(
        (sum - 1.0).abs() < 1e-9 && init.iter().all(|&p| p >= 0.0),
        "initial distribution must be a probability vector (sum {sum})"
    );
    let kernel = TransitionKernel::from_config(config);
    let c = config.num_levels;
    let t_max = config.horizon;
    let mut occupancy = vec![0.0; (t_max + 1) * c];
    occupancy[..c].copy_from_slice(init);
    for t in 1..=t_max {
        let (done, rest) = occupancy.split_at_mut(t * c);
        let current = &done[(t - 1) * c..];
        let next = &mut rest[..c];
        for x in 1..=c {
            let mass = current[x - 1];
            if mass == 0.0 {
                continue;
            }
            let probs = kind_probs(kind, x, s);
            for d in Decision::BOTH {
                let weight = mass * probs[d.index()];
                if weight == 0.0 {
                    continue;
                }
                for (i, &p) in kernel.row(s, x, d).iter().enumerate() {
                    next[i] += weight * p;
                }
            }
        }
    }
    let mut eta = vec![0.0; c];
    for t in 1..=t_max {
        for x in 0..c {
            eta[x] += occupancy[(t - 1) * c + x];
        }
    }
    VisitationTable {
        horizon: t_max,
        num_levels: c,
        occupancy,
        eta,
    }
}

/// Forward state-occupancy propagation for the behavior policy from an
/// arbitrary initial distribution.
pub fn visitation(
    params: &PolicyParams,
    s: Group,
    config: &EnvConfig,
    init: &[f64],
) -> VisitationTable {
    visitation_for(&PolicyKind::Behavior(params.clone()), s, config, init)
}

/// Occupancy under the always-deny baseline.
pub fn baseline_visitation(s: Group, config: &EnvConfig, init: &[f64]) -> VisitationTable {
    visitation_for(&PolicyKind::BaselinePi0, s, config, init)
}

/// Expected gain increase from approving versus denying at one state:
/// the treatment-minus-control contrast of the one-step expected gain.
pub fn benefit(score: usize, s: Group, config: &EnvConfig) -> f64 {
    assert!(
        score >= 1 && score <= config.num_levels,
        "score {score} outside 1..={}",
        config.num_levels
    );
    let kernel = TransitionKernel::from_config(config);
    let approve = kernel.row(s, score, Decision::Approve);
    let deny = kernel.row(s, score, Decision::Deny);
    approve
        .iter()
        .zip(deny)
        .enumerate()
        .map(|(i, (&pa, &pd))| (pa - pd) * gain_value(config, score, i + 1))
        .sum()
}

/// Expected cumulative gain gap between the groups under the behavior
/// policy, each group evaluated from its own initial distribution.
pub fn qualification_gain_parity(params: &PolicyParams, config: &EnvConfig) -> f64 {
    let plus = value_behavior(params, Group::Plus, config)
        .expected_initial(config.init_dist(Group::Plus));
    let minus = value_behavior(params, Group::Minus, config)
        .expected_initial(config.init_dist(Group::Minus));
    plus - minus
}

/// Effect decomposition with the default benefit-fairness radius.
pub fn decompose(params: &PolicyParams, config: &EnvConfig) -> DecompositionReport {
    decompose_with_epsilon(params, config, DEFAULT_BENEFIT_EPSILON)
        .expect("default epsilon is positive")
}

/// Full effect decomposition of the gain parity, plus the benefit-fairness
/// gap (at the given radius), the final-distribution Wasserstein gap and
/// per-group approval rates.
pub fn decompose_with_epsilon(
    params: &PolicyParams,
    config: &EnvConfig,
    epsilon: f64,
) -> Result<DecompositionReport> {
    if epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    let mut e_behavior = [0.0; 2];
    let mut e_virtual = [0.0; 2];
    let mut e_baseline = [0.0; 2];
    let mut visits = Vec::with_capacity(2);
    for s in Group::BOTH {
        let init = config.init_dist(s);
        e_behavior[s.index()] = value_behavior(params, s, config).expected_initial(init);
        e_virtual[s.index()] = value_virtual(params, s, config).expected_initial(init);
        e_baseline[s.index()] = value_baseline(s, config).expected_initial(init);
        visits.push(visitation(params, s, config, init));
    }
    let p = Group::Plus.index();
    let m = Group::Minus.index();
    let c_pi = e_behavior[p] - e_behavior[m];
    let dpe = (e_behavior[p] - e_virtual[p]) - (e_behavior[m] - e_virtual[m]);
    let ipe = (e_virtual[p] - e_baseline[p]) - (e_virtual[m] - e_baseline[m]);
    let spe = e_baseline[p] - e_baseline[m];

    let horizon = config.horizon as f64;
    let mut loan_rate = [0.0; 2];
    for s in Group::BOTH {
        let eta = visits[s.index()].eta();
        loan_rate[s.index()] = eta
            .iter()
            .enumerate()
            .map(|(i, &e)| e * params.approve_prob(i + 1, s))
            .sum::<f64>()
            / horizon;
    }

    let averaged: Vec<Vec<f64>> = visits.iter().map(|v| v.time_averaged()).collect();
    let lambda_metric =
        benefit_fairness_gap(params, [&averaged[p], &averaged[m]], config, epsilon)?;
    let wasserstein_gap = wasserstein_gap(
        visits[p].final_distribution(),
        visits[m].final_distribution(),
    )?;

    Ok(DecompositionReport {
        c_pi,
        dpe,
        ipe,
        spe,
        lambda_metric,
        wasserstein_gap,
        loan_rate,
    })
}

/// The direct policy effect recomputed from visit counts and per-state
/// benefits instead of value-table differences. Agrees with
/// [`decompose`]'s `dpe` up to floating-point error.
pub fn dpe_via_benefit(params: &PolicyParams, config: &EnvConfig) -> f64 {
    let mut terms = [0.0; 2];
    for s in Group::BOTH {
        let eta = visitation(params, s, config, config.init_dist(s));
        terms[s.index()] = eta
            .eta()
            .iter()
            .enumerate()
            .map(|(i, &e)| e * params.approve_prob(i + 1, s) * benefit(i + 1, s, config))
            .sum();
    }
    terms[Group::Plus.index()] - terms[Group::Minus.index()]
}

/// Residuals of the two visitation identities behind the benefit
/// reformulation, checked against exhaustive trajectory enumeration.
///
/// For every start state the direct-impact identity compares the
/// enumerated behavior-minus-virtual value with the visit-count-weighted
/// sum of approval probability times benefit at the visited state; the
/// delayed-impact identity compares the enumerated virtual-minus-baseline
/// value with the occupancy difference weighted by the deny-row expected
/// gain at the visited state. Returns the maximum absolute residual of
/// each identity over start states.
pub fn proposition1_residual(
    params: &PolicyParams,
    s: Group,
    config: &EnvConfig,
) -> Result<(f64, f64)> {
    crate::enumeration::check_capacity(config)?;
    let c = config.num_levels;
    let kernel = TransitionKernel::from_config(config);

    // Deny-row expected one-step gain per state.
    let deny_gain: Vec<f64> = (1..=c)
        .map(|x| {
            kernel
                .row(s, x, Decision::Deny)
                .iter()
                .enumerate()
                .map(|(i, &p)| p * gain_value(config, x, i + 1))
                .sum()
        })
        .collect();

    let behavior = PolicyKind::Behavior(params.clone());
    let virtual_ps = PolicyKind::VirtualPs(params.clone());
    let mut direct_residual: f64 = 0.0;
    let mut delayed_residual: f64 = 0.0;
    for start in 1..=c {
        let mut init = vec![0.0; c];
        init[start - 1] = 1.0;
        let eta_pi = visitation_for(&behavior, s, config, &init);
        let eta_0 = visitation_for(&PolicyKind::BaselinePi0, s, config, &init);

        let v_pi = crate::enumeration::enumerate_value(&behavior, s, config, start);
        let v_ps = crate::enumeration::enumerate_value(&virtual_ps, s, config, start);
        let v_0 = crate::enumeration::enumerate_value(&PolicyKind::BaselinePi0, s, config, start);

        let direct_rhs: f64 = eta_pi
            .eta()
            .iter()
            .enumerate()
            .map(|(i, &e)| e * params.approve_prob(i + 1, s) * benefit(i + 1, s, config))
            .sum();
        direct_residual = direct_residual.max(((v_pi - v_ps) - direct_rhs).abs());

        let delayed_rhs: f64 = (0..c)
            .map(|i| (eta_pi.eta()[i] - eta_0.eta()[i]) * deny_gain[i])
            .sum();
        delayed_residual = delayed_residual.max(((v_ps - v_0) - delayed_rhs).abs());
    }
    Ok((direct_residual, delayed_residual))
}

/// Pairwise benefit-fairness gap: approval-rate differences across all
/// cross-group state pairs, inverse-weighted by how far apart the pair's
/// benefits are and weighted by the supplied per-group state
/// distributions. Always lands in [0, 1].
pub fn benefit_fairness_gap(
    params: &PolicyParams,
    state_dists: [&[f64]; 2],
    config: &EnvConfig,
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    let c = config.num_levels;
    for dist in state_dists {
        if dist.len() != c {
            return Err(Error::LengthMismatch {
                left: dist.len(),
                right: c,
            });
        }
    }
    let benefit_plus: Vec<f64> = (1..=c).map(|x| benefit(x, Group::Plus, config)).collect();
    let benefit_minus: Vec<f64> = (1..=c).map(|x| benefit(x, Group::Minus, config)).collect();
    let approve_plus: Vec<f64> = (1..=c).map(|x| params.approve_prob(x, Group::Plus)).collect();
    let approve_minus: Vec<f64> = (1..=c)
        .map(|x| params.approve_prob(x, Group::Minus))
        .collect();
    let p_dist = state_dists[Group::Plus.index()];
    let m_dist = state_dists[Group::Minus.index()];
    let mut total = 0.0;
    for x in 0..c {
        if p_dist[x] == 0.0 {
            continue;
        }
        for y in 0..c {
            let weight = p_dist[x] * m_dist[y];
            if weight == 0.0 {
                continue;
            }
            let rate_gap = (approve_plus[x] - approve_minus[y]).abs();
            let benefit_gap = (benefit_plus[x] - benefit_minus[y]).abs();
            total += epsilon * rate_gap / (epsilon + benefit_gap) * weight;
        }
    }
    Ok(total)
}

/// Wasserstein-1 distance between two distributions on the ordered score
/// support with unit spacing: the L1 distance of their CDFs.
pub fn wasserstein_gap(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        cdf_p += a;
        cdf_q += b;
        total += (cdf_p - cdf_q).abs();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_individual, sample_step, GroupParams};
    use crate::policy::sample_action;
    use crate::testutil::{approx, pointmass, random_config, random_policy, symmetric_config};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every branch of every transition returns to the current score, so
    /// all gains vanish regardless of the policy.
    fn zero_gain_config() -> EnvConfig {
        EnvConfig {
            num_levels: 2,
            group_prior: 0.5,
            groups: [
                GroupParams {
                    init_score_dist: vec![0.5, 0.5],
                    repay_prob: vec![0.0, 1.0],
                    drift_dist: [0.0, 1.0, 0.0],
                },
                GroupParams {
                    init_score_dist: vec![0.5, 0.5],
                    repay_prob: vec![0.0, 1.0],
                    drift_dist: [0.0, 1.0, 0.0],
                },
            ],
            reward_success: 1.0,
            reward_default: 2.0,
            horizon: 6,
        }
    }

    fn force_deny(c: usize) -> PolicyParams {
        let mut params = PolicyParams::zeros(c);
        for s in Group::BOTH {
            for x in 1..=c {
                params.set_logit(s, x, Decision::Deny, 40.0);
                params.set_logit(s, x, Decision::Approve, -40.0);
            }
        }
        params
    }

    #[test]
    fn zero_gain_environment_has_zero_values() {
        let cfg = zero_gain_config();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = random_policy(&mut rng, cfg.num_levels);
        for s in Group::BOTH {
            let tables = value_behavior(&params, s, &cfg);
            for t in 1..=cfg.horizon {
                for x in 1..=cfg.num_levels {
                    assert!(tables.v(t, x).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn one_step_baseline_without_drift_is_zero() {
        let mut cfg = zero_gain_config();
        cfg.horizon = 1;
        for s in Group::BOTH {
            let tables = value_baseline(s, &cfg);
            for x in 1..=cfg.num_levels {
                assert_eq!(tables.v(1, x), 0.0);
            }
        }
    }

    #[test]
    fn terminal_value_slice_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = random_config(&mut rng, 5, 4);
        let params = random_policy(&mut rng, 5);
        let tables = value_behavior(&params, Group::Plus, &cfg);
        for x in 1..=5 {
            assert_eq!(tables.v(cfg.horizon + 1, x), 0.0);
        }
    }

    #[test]
    fn behavior_value_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = random_config(&mut rng, 5, 6);
        let params = random_policy(&mut rng, 5);
        let episodes = 100_000usize;
        let mut sums = [0.0f64; 2];
        let mut sq_sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for _ in 0..episodes {
            let mut ind = sample_individual(&mut rng, &cfg);
            let group = ind.group;
            let mut total = 0.0;
            for _ in 0..cfg.horizon {
                let d = sample_action(&mut rng, &params, ind.score, ind.group);
                let (next, _, gain) = sample_step(&mut rng, &ind, d, &cfg);
                total += gain;
                ind = next;
            }
            sums[group.index()] += total;
            sq_sums[group.index()] += total * total;
            counts[group.index()] += 1;
        }
        for s in Group::BOTH {
            let i = s.index();
            let n = counts[i] as f64;
            let mean = sums[i] / n;
            let var = (sq_sums[i] / n - mean * mean).max(0.0);
            let se = (var / n).sqrt();
            let exact = value_behavior(&params, s, &cfg).expected_initial(cfg.init_dist(s));
            assert!(
                (mean - exact).abs() < 3.0 * se,
                "group {}: mc {mean} vs dp {exact} (se {se})",
                s.label()
            );
        }
    }

    #[test]
    fn baseline_value_is_group_symmetric_on_symmetric_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = symmetric_config(&mut rng, 6, 5);
        let plus = value_baseline(Group::Plus, &cfg);
        let minus = value_baseline(Group::Minus, &cfg);
        for t in 1..=cfg.horizon {
            for x in 1..=6 {
                assert_eq!(plus.v(t, x), minus.v(t, x));
            }
        }
    }

    #[test]
    fn baseline_value_ignores_policy_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = random_config(&mut rng, 5, 4);
        let a = value_baseline(Group::Plus, &cfg);
        // Rebuilding after an unrelated policy change must not matter;
        // baseline takes no params at all, so compare against a fresh run.
        let b = value_baseline(Group::Plus, &cfg);
        for t in 1..=cfg.horizon {
            for x in 1..=5 {
                assert_eq!(a.v(t, x), b.v(t, x));
            }
        }
    }

    #[test]
    fn baseline_equals_behavior_forced_to_deny() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = random_config(&mut rng, 6, 7);
        let deny = force_deny(6);
        for s in Group::BOTH {
            let forced = value_behavior(&deny, s, &cfg);
            let baseline = value_baseline(s, &cfg);
            for t in 1..=cfg.horizon {
                for x in 1..=6 {
                    assert!(approx(forced.v(t, x), baseline.v(t, x), 1e-12));
                }
            }
        }
    }

    #[test]
    fn virtual_collapses_to_baseline_under_forced_denial() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = random_config(&mut rng, 5, 5);
        let deny = force_deny(5);
        for s in Group::BOTH {
            let virt = value_virtual(&deny, s, &cfg);
            let baseline = value_baseline(s, &cfg);
            for t in 1..=cfg.horizon {
                for x in 1..=5 {
                    assert!(approx(virt.v(t, x), baseline.v(t, x), 1e-12));
                }
            }
        }
    }

    #[test]
    fn virtual_equals_baseline_at_horizon_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cfg = random_config(&mut rng, 5, 3);
        cfg.horizon = 1;
        let params = random_policy(&mut rng, 5);
        for s in Group::BOTH {
            let virt = value_virtual(&params, s, &cfg);
            let baseline = value_baseline(s, &cfg);
            for x in 1..=5 {
                assert!(approx(virt.v(1, x), baseline.v(1, x), 1e-15));
            }
        }
    }

    #[test]
    fn visitation_single_step_eta_is_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut cfg = random_config(&mut rng, 5, 3);
        cfg.horizon = 1;
        let params = random_policy(&mut rng, 5);
        let init = vec![0.2, 0.1, 0.3, 0.25, 0.15];
        let table = visitation(&params, Group::Plus, &cfg, &init);
        for x in 0..5 {
            assert_eq!(table.eta()[x], init[x]);
        }
    }

    #[test]
    fn visitation_walks_deterministic_chain() {
        // Sure repayment, no drift, always approve: a point mass walks up
        // one level per step until it parks at the top.
        let mut cfg = zero_gain_config();
        cfg.num_levels = 4;
        cfg.horizon = 4;
        for g in &mut cfg.groups {
            g.init_score_dist = pointmass(4, 1);
            g.repay_prob = vec![1.0; 4];
            g.drift_dist = [0.0, 1.0, 0.0];
        }
        let mut approve = PolicyParams::zeros(4);
        for s in Group::BOTH {
            for x in 1..=4 {
                approve.set_logit(s, x, Decision::Approve, 40.0);
                approve.set_logit(s, x, Decision::Deny, -40.0);
            }
        }
        let table = visitation(&approve, Group::Plus, &cfg, &pointmass(4, 1));
        for t in 1..=4usize {
            let expected_level = t.min(4);
            assert!(approx(table.occupancy(t, expected_level), 1.0, 1e-12));
        }
        assert!(approx(table.occupancy(5, 4), 1.0, 1e-12));
    }

    #[test]
    fn visitation_slices_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = random_config(&mut rng, 7, 9);
        let params = random_policy(&mut rng, 7);
        let table = visitation(&params, Group::Minus, &cfg, cfg.init_dist(Group::Minus));
        for t in 1..=cfg.horizon + 1 {
            let sum: f64 = (1..=7).map(|x| table.occupancy(t, x)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "slice {t} sums to {sum}");
        }
        let eta_sum: f64 = table.eta().iter().sum();
        assert!((eta_sum - cfg.horizon as f64).abs() < 1e-10);
    }

    #[test]
    fn benefit_zero_when_approval_cannot_move_the_score() {
        // At the top level with sure repayment and no drift, approving and
        // denying land in the same place.
        let mut cfg = zero_gain_config();
        cfg.num_levels = 7;
        for g in &mut cfg.groups {
            g.init_score_dist = pointmass(7, 7);
            g.repay_prob = vec![1.0; 7];
            g.drift_dist = [0.0, 1.0, 0.0];
        }
        assert_eq!(benefit(7, Group::Plus, &cfg), 0.0);
    }

    #[test]
    fn benefit_is_one_step_gain_under_sure_repayment() {
        let mut cfg = zero_gain_config();
        cfg.num_levels = 7;
        for g in &mut cfg.groups {
            g.init_score_dist = pointmass(7, 1);
            g.repay_prob = vec![1.0; 7];
            g.drift_dist = [0.0, 1.0, 0.0];
        }
        for x in 1..7 {
            let expected = crate::env::qualification_gain(x, x + 1, &cfg).unwrap();
            assert!(approx(benefit(x, Group::Plus, &cfg), expected, 1e-15));
        }
    }

    #[test]
    fn benefit_at_top_level_is_negative_default_mass() {
        let mut cfg = zero_gain_config();
        cfg.num_levels = 7;
        let p = 0.7;
        for g in &mut cfg.groups {
            g.init_score_dist = pointmass(7, 7);
            g.repay_prob = vec![p; 7];
            g.drift_dist = [0.0, 1.0, 0.0];
        }
        assert!(approx(benefit(7, Group::Plus, &cfg), -(1.0 - p), 1e-15));
    }

    #[test]
    fn decompose_is_zero_on_symmetric_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cfg = symmetric_config(&mut rng, 7, 8);
        // Same logits for both groups.
        let mut params = PolicyParams::zeros(7);
        for x in 1..=7 {
            let v = rng.random::<f64>() * 2.0 - 1.0;
            for s in Group::BOTH {
                params.set_logit(s, x, Decision::Approve, v);
            }
        }
        let report = decompose(&params, &cfg);
        assert_eq!(report.c_pi, 0.0);
        assert_eq!(report.dpe, 0.0);
        assert_eq!(report.ipe, 0.0);
        assert_eq!(report.spe, 0.0);
    }

    #[test]
    fn decompose_under_forced_denial_reduces_to_spe() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = random_config(&mut rng, 6, 6);
        let report = decompose(&force_deny(6), &cfg);
        assert!(report.dpe.abs() < 1e-12);
        assert!(report.ipe.abs() < 1e-12);
        assert!(approx(report.c_pi, report.spe, 1e-12));
    }

    #[test]
    fn decomposition_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let cfg = random_config(&mut rng, 7, 20);
            let params = random_policy(&mut rng, 7);
            let report = decompose(&params, &cfg);
            let residual = (report.c_pi - (report.dpe + report.ipe + report.spe)).abs();
            assert!(residual < 1e-10, "identity residual {residual}");
        }
    }

    #[test]
    fn dpe_via_benefit_vanishes_under_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = random_config(&mut rng, 6, 6);
        assert!(dpe_via_benefit(&force_deny(6), &cfg).abs() < 1e-12);
    }

    #[test]
    fn dpe_via_benefit_matches_decompose() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let cfg = random_config(&mut rng, 7, 12);
            let params = random_policy(&mut rng, 7);
            let direct = decompose(&params, &cfg).dpe;
            let reformulated = dpe_via_benefit(&params, &cfg);
            assert!(
                (direct - reformulated).abs() < 1e-10,
                "dpe {direct} vs benefit form {reformulated}"
            );
        }
    }

    #[test]
    fn dpe_via_benefit_zero_when_nothing_moves() {
        // Degenerate instance: point-mass initial state, zero drift and
        // repay probabilities pinning every transition to the start state.
        let cfg = zero_gain_config();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let params = random_policy(&mut rng, 2);
        assert!(dpe_via_benefit(&params, &cfg).abs() < 1e-14);
    }

    #[test]
    fn proposition1_residuals_are_tiny_on_random_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..10 {
            let cfg = random_config(&mut rng, 3, 3);
            let params = random_policy(&mut rng, 3);
            for s in Group::BOTH {
                let (direct, delayed) = proposition1_residual(&params, s, &cfg).unwrap();
                assert!(direct < 1e-9, "direct residual {direct}");
                assert!(delayed < 1e-9, "delayed residual {delayed}");
            }
        }
    }

    #[test]
    fn proposition1_zero_under_baseline_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = random_config(&mut rng, 3, 3);
        let (direct, delayed) =
            proposition1_residual(&force_deny(3), Group::Plus, &cfg).unwrap();
        assert!(direct < 1e-12);
        assert!(delayed < 1e-12);
    }

    #[test]
    fn proposition1_single_step_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut cfg = random_config(&mut rng, 4, 2);
        cfg.horizon = 1;
        let params = random_policy(&mut rng, 4);
        let (direct, delayed) = proposition1_residual(&params, Group::Minus, &cfg).unwrap();
        assert!(direct < 1e-12);
        assert!(delayed < 1e-12);
    }

    #[test]
    fn proposition1_rejects_large_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cfg = random_config(&mut rng, 7, 20);
        let params = random_policy(&mut rng, 7);
        assert!(matches!(
            proposition1_residual(&params, Group::Plus, &cfg),
            Err(Error::EnumerationCapacity { .. })
        ));
    }

    #[test]
    fn lambda_zero_for_identical_constant_approval() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let cfg = random_config(&mut rng, 7, 5);
        let mut params = PolicyParams::zeros(7);
        for s in Group::BOTH {
            for x in 1..=7 {
                params.set_logit(s, x, Decision::Approve, 0.3);
            }
        }
        let dists = [cfg.init_dist(Group::Plus), cfg.init_dist(Group::Minus)];
        let lambda = benefit_fairness_gap(&params, dists, &cfg, 0.05).unwrap();
        assert!(lambda.abs() < 1e-15);
    }

    #[test]
    fn lambda_single_pair_with_equal_benefits_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = symmetric_config(&mut rng, 7, 5);
        let mut params = PolicyParams::zeros(7);
        params.set_logit(Group::Plus, 3, Decision::Approve, 40.0);
        params.set_logit(Group::Plus, 3, Decision::Deny, -40.0);
        params.set_logit(Group::Minus, 3, Decision::Approve, -40.0);
        params.set_logit(Group::Minus, 3, Decision::Deny, 40.0);
        let point = pointmass(7, 3);
        let lambda = benefit_fairness_gap(&params, [&point, &point], &cfg, 0.05).unwrap();
        assert!(approx(lambda, 1.0, 1e-12));
    }

    #[test]
    fn lambda_monotone_in_rate_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let cfg = symmetric_config(&mut rng, 7, 5);
        let dists = [cfg.init_dist(Group::Plus), cfg.init_dist(Group::Minus)];
        let mut prev = -1.0;
        for step in 0..6 {
            let mut params = PolicyParams::zeros(7);
            for x in 1..=7 {
                params.set_logit(Group::Plus, x, Decision::Approve, step as f64 * 0.8);
            }
            let lambda = benefit_fairness_gap(&params, dists, &cfg, 0.05).unwrap();
            assert!(lambda >= prev - 1e-15, "lambda decreased: {prev} -> {lambda}");
            prev = lambda;
        }
    }

    #[test]
    fn lambda_rejects_nonpositive_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cfg = random_config(&mut rng, 7, 5);
        let params = PolicyParams::zeros(7);
        let dists = [cfg.init_dist(Group::Plus), cfg.init_dist(Group::Minus)];
        assert!(matches!(
            benefit_fairness_gap(&params, dists, &cfg, 0.0),
            Err(Error::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn wasserstein_basics() {
        assert_eq!(wasserstein_gap(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let mut a = vec![0.0; 7];
        a[0] = 1.0;
        let mut b = vec![0.0; 7];
        b[6] = 1.0;
        assert!(approx(wasserstein_gap(&a, &b).unwrap(), 6.0, 1e-15));
        assert!(approx(
            wasserstein_gap(&[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            0.5,
            1e-15
        ));
        assert!(matches!(
            wasserstein_gap(&[1.0], &[0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn spe_vanishes_on_symmetric_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..20 {
            let cfg = symmetric_config(&mut rng, 7, 10);
            let params = random_policy(&mut rng, 7);
            let report = decompose(&params, &cfg);
            assert!(report.spe.abs() < 1e-12);
        }
    }
}
