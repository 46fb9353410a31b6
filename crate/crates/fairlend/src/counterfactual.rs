//! Baseline-qualification adjustment.
//!
//! The groups may already differ in qualification before any decision is
//! made. To fold that head start into the parity measure, a fictitious
//! pre-period is added in which both groups share the pooled score
//! marginal; each group's observed distribution is then reached through a
//! rank-preserving counterfactual mapping, and the expected gain of that
//! move is the group's baseline gain. The adjusted parity is the baseline
//! gain gap plus the usual in-process parity.

use rand::Rng;

use crate::analysis::qualification_gain_parity;
use crate::env::{gain_value, sample_categorical, EnvConfig, Group};

use crate::policy::PolicyParams;

/// Joint distribution over (source score, target score) pairs.
#[derive(Debug, Clone)]
pub struct Coupling {
    num_levels: usize,
    mass: Vec<f64>,
}

impl Coupling {
    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// Mass on the (source, target) cell, 1-based levels.
    pub fn mass(&self, from: usize, to: usize) -> f64 {
        self.mass[(from - 1) * self.num_levels + (to - 1)]
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        (1..=self.num_levels)
            .map(|x| (1..=self.num_levels).map(|y| self.mass(x, y)).sum())
            .collect()
    }

    pub fn column_marginals(&self) -> Vec<f64> {
        (1..=self.num_levels)
            .map(|y| (1..=self.num_levels).map(|x| self.mass(x, y)).sum())
            .collect()
    }

    /// Cells carrying strictly positive mass, as (source, target, mass).
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let mut cells = Vec::new();
        for x in 1..=self.num_levels {
            for y in 1..=self.num_levels {
                let m = self.mass(x, y);
                if m > 0.0 {
                    cells.push((x, y, m));
                }
            }
        }
        cells
    }

    /// Mean absolute displacement between source and target levels.
    pub fn expected_abs_displacement(&self) -> f64 {
        self.support()
            .into_iter()
            .map(|(x, y, m)| m * (x as f64 - y as f64).abs())
            .sum()
    }

    /// Draw a target level from the conditional given a source level.
    /// The source level must carry positive marginal mass.
    pub fn sample_conditional(&self, rng: &mut impl Rng, from: usize) -> usize {
        let row: Vec<f64> = (1..=self.num_levels).map(|y| self.mass(from, y)).collect();
        let total: f64 = row.iter().sum();
        assert!(total > 0.0, "source level {from} has no mass");
        let normalized: Vec<f64> = row.iter().map(|m| m / total).collect();
        sample_categorical(rng, &normalized) + 1
    }

    /// CSV dump, one `row,column,mass` line per positive cell.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("row,column,mass\n");
        for (x, y, m) in self.support() {
            out.push_str(&format!("{x},{y},{m}\n"));
        }
        out
    }
}

fn assert_distribution(name: &str, dist: &[f64]) {
    assert!(
        dist.iter().all(|&p| (0.0..=1.0).contains(&p)),
        "{name} has entries outside [0, 1]"
    );
    let sum: f64 = dist.iter().sum();
    assert!(
        (sum - 1.0).abs() < 1e-9,
        "{name} sums to {sum}, expected 1"
    );
}

/// The comonotonic (inverse-CDF) coupling of two distributions on the
/// same ordered support: mass is matched in sorted order, splitting
/// proportionally where level boundaries disagree. Rank preserving, and
/// it minimizes the expected absolute displacement among all couplings.
pub fn monotone_coupling(from_dist: &[f64], to_dist: &[f64]) -> Coupling {
    assert_eq!(
        from_dist.len(),
        to_dist.len(),
        "coupled distributions must share a support"
    );
    assert_distribution("from_dist", from_dist);
    assert_distribution("to_dist", to_dist);
    let c = from_dist.len();
    let mut mass = vec![0.0; c * c];
    let mut i = 0usize;
    let mut j = 0usize;
    let mut remaining_from = from_dist[0];
    let mut remaining_to = to_dist[0];
    const EXHAUSTED: f64 = 1e-15;
    while i < c && j < c {
        let moved = remaining_from.min(remaining_to);
        if moved > 0.0 {
            mass[i * c + j] += moved;
            remaining_from -= moved;
            remaining_to -= moved;
        }
        if remaining_from <= EXHAUSTED {
            i += 1;
            if i < c {
                remaining_from = from_dist[i];
            }
        }
        if remaining_to <= EXHAUSTED {
            j += 1;
            if j < c {
                remaining_to = to_dist[j];
            }
        }
    }
    Coupling {
        num_levels: c,
        mass,
    }
}

/// Pooled score marginal across both groups at the first timestep.
pub fn common_marginal(config: &EnvConfig) -> Vec<f64> {
    let prior = config.group_probs();
    let plus = config.init_dist(Group::Plus);
    let minus = config.init_dist(Group::Minus);
    plus.iter()
        .zip(minus)
        .map(|(&a, &b)| prior[0] * a + prior[1] * b)
        .collect()
}

/// Expected baseline gain of one group: the qualification gain of moving
/// from the pooled marginal to the group's own initial distribution along
/// the rank-preserving coupling.
pub fn baseline_gain(s: Group, config: &EnvConfig) -> f64 {
    let coupling = monotone_coupling(&common_marginal(config), config.init_dist(s));
    coupling
        .support()
        .into_iter()
        .map(|(x, y, m)| m * gain_value(config, x, y))
        .sum()
}

/// Baseline gain gap between the groups.
pub fn baseline_gap(config: &EnvConfig) -> f64 {
    baseline_gain(Group::Plus, config) - baseline_gain(Group::Minus, config)
}

/// Monte Carlo estimate of [`baseline_gain`]: draw a score from the pooled
/// marginal, push it through the coupling conditional, and average the
/// gains. Returns the mean and its standard error.
pub fn baseline_gain_sampled(
    rng: &mut impl Rng,
    s: Group,
    config: &EnvConfig,
    samples: usize,
) -> (f64, f64) {
    assert!(samples > 0);
    let marginal = common_marginal(config);
    let coupling = monotone_coupling(&marginal, config.init_dist(s));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let from = sample_categorical(rng, &marginal) + 1;
        let to = coupling.sample_conditional(rng, from);
        let g = gain_value(config, from, to);
        sum += g;
        sum_sq += g * g;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Parity measure with the baseline gain gap folded in: the head-start
/// difference plus the in-process qualification gain parity.
pub fn adjusted_parity(params: &PolicyParams, config: &EnvConfig) -> f64 {
    baseline_gap(config) + qualification_gain_parity(params, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{decompose, wasserstein_gap};
    use crate::env::GroupParams;
    use crate::testutil::{approx, pointmass, random_config, random_dist, random_policy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_distributions_couple_on_the_diagonal() {
        let dist = vec![0.2, 0.3, 0.1, 0.4];
        let coupling = monotone_coupling(&dist, &dist);
        for (x, y, m) in coupling.support() {
            assert_eq!(x, y);
            assert!(approx(m, dist[x - 1], 1e-12));
        }
    }

    #[test]
    fn point_masses_couple_in_one_cell() {
        let from = pointmass(7, 3);
        let to = pointmass(7, 5);
        let coupling = monotone_coupling(&from, &to);
        assert_eq!(coupling.support(), vec![(3, 5, 1.0)]);
    }

    #[test]
    fn two_level_example_matches_hand_computation() {
        let coupling = monotone_coupling(&[0.6, 0.4], &[0.3, 0.7]);
        assert!(approx(coupling.mass(1, 1), 0.3, 1e-12));
        assert!(approx(coupling.mass(1, 2), 0.3, 1e-12));
        assert!(approx(coupling.mass(2, 2), 0.4, 1e-12));
        assert_eq!(coupling.mass(2, 1), 0.0);
    }

    #[test]
    fn marginals_and_monotonicity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..50 {
            let from = random_dist(&mut rng, 7);
            let to = random_dist(&mut rng, 7);
            let coupling = monotone_coupling(&from, &to);
            let rows = coupling.row_marginals();
            let cols = coupling.column_marginals();
            for i in 0..7 {
                assert!(approx(rows[i], from[i], 1e-10), "row marginal {i}");
                assert!(approx(cols[i], to[i], 1e-10), "column marginal {i}");
            }
            let support = coupling.support();
            for &(x1, y1, _) in &support {
                for &(x2, y2, _) in &support {
                    if x1 < x2 {
                        assert!(y1 <= y2, "crossing cells ({x1},{y1}) and ({x2},{y2})");
                    }
                }
            }
        }
    }

    #[test]
    fn coupling_attains_the_wasserstein_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let from = random_dist(&mut rng, 7);
            let to = random_dist(&mut rng, 7);
            let coupling = monotone_coupling(&from, &to);
            let w1 = wasserstein_gap(&from, &to).unwrap();
            assert!(
                approx(coupling.expected_abs_displacement(), w1, 1e-9),
                "coupling cost {} vs W1 {w1}",
                coupling.expected_abs_displacement()
            );
        }
    }

    #[test]
    fn baseline_gains_match_for_identical_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut cfg = random_config(&mut rng, 7, 5);
        cfg.groups[1].init_score_dist = cfg.groups[0].init_score_dist.clone();
        assert!(approx(
            baseline_gain(Group::Plus, &cfg),
            baseline_gain(Group::Minus, &cfg),
            1e-14
        ));
        assert!(baseline_gap(&cfg).abs() < 1e-14);
    }

    #[test]
    fn baseline_gain_single_cell_case() {
        // Collapse the pooled marginal onto level 3 and the plus group's
        // own distribution onto level 5: the baseline gain is the plain
        // gain of that move.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut cfg = random_config(&mut rng, 7, 5);
        cfg.group_prior = 0.0; // pooled marginal equals the minus dist
        cfg.groups[0].init_score_dist = pointmass(7, 5);
        cfg.groups[1].init_score_dist = pointmass(7, 3);
        let expected = crate::env::qualification_gain(3, 5, &cfg).unwrap();
        assert!(approx(baseline_gain(Group::Plus, &cfg), expected, 1e-14));
        assert!((expected - 98.0 / 127.0).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_baseline_gain_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let cfg = random_config(&mut rng, 7, 5);
        for s in Group::BOTH {
            let exact = baseline_gain(s, &cfg);
            let (mean, se) = baseline_gain_sampled(&mut rng, s, &cfg, 100_000);
            assert!(
                (mean - exact).abs() < 3.0 * se.max(1e-9),
                "group {}: mc {mean} vs exact {exact} (se {se})",
                s.label()
            );
        }
    }

    #[test]
    fn adjusted_parity_is_gap_plus_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let cfg = random_config(&mut rng, 7, 8);
        let params = random_policy(&mut rng, 7);
        let expected = baseline_gap(&cfg) + qualification_gain_parity(&params, &cfg);
        assert!(approx(adjusted_parity(&params, &cfg), expected, 1e-12));
    }

    #[test]
    fn adjusted_parity_zero_for_identical_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let mut cfg = random_config(&mut rng, 7, 8);
        cfg.groups[1] = cfg.groups[0].clone();
        // Identical tables and group-symmetric logits: nothing differs.
        let mut params = PolicyParams::zeros(7);
        for x in 1..=7 {
            let v = rng.random::<f64>() - 0.5;
            for s in Group::BOTH {
                params.set_logit(s, x, crate::env::Decision::Approve, v);
            }
        }
        assert!(adjusted_parity(&params, &cfg).abs() < 1e-12);
    }

    #[test]
    fn adjusted_parity_under_forced_denial_is_gap_plus_spe() {
        // Group-equal transition tables but unequal initial distributions:
        // under the always-deny policy the in-process parity reduces to
        // the spurious effect.
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let shared_repay: Vec<f64> = (0..7).map(|i| 0.3 + 0.08 * i as f64).collect();
        let cfg = EnvConfig {
            num_levels: 7,
            group_prior: 0.5,
            groups: [
                GroupParams {
                    init_score_dist: random_dist(&mut rng, 7),
                    repay_prob: shared_repay.clone(),
                    drift_dist: [0.15, 0.7, 0.15],
                },
                GroupParams {
                    init_score_dist: random_dist(&mut rng, 7),
                    repay_prob: shared_repay,
                    drift_dist: [0.15, 0.7, 0.15],
                },
            ],
            reward_success: 1.0,
            reward_default: 2.0,
            horizon: 8,
        };
        let mut deny = PolicyParams::zeros(7);
        for s in Group::BOTH {
            for x in 1..=7 {
                deny.set_logit(s, x, crate::env::Decision::Deny, 40.0);
                deny.set_logit(s, x, crate::env::Decision::Approve, -40.0);
            }
        }
        let report = decompose(&deny, &cfg);
        let expected = baseline_gap(&cfg) + report.spe;
        assert!(approx(adjusted_parity(&deny, &cfg), expected, 1e-10));
    }

    #[test]
    fn coupling_csv_lists_support_cells() {
        let coupling = monotone_coupling(&[0.6, 0.4], &[0.3, 0.7]);
        let csv = coupling.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "row,column,mass");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,1,"));
    }
}
