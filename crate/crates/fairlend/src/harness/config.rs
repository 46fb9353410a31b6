//! Configuration files and named environment presets.
//!
//! Settings load from a TOML document with an `[env]` table and an
//! optional `[train]` table. Unknown keys are rejected. Three presets
//! ship built in: `setting1` and `setting2` share initial score
//! distributions (the minus group starting lower) and differ in their
//! repayment tables, while `setting3` gives both groups the same initial
//! distribution but group-dependent drift that pulls the minus group
//! down.

use std::path::Path;

use serde::Deserialize;

use crate::env::{EnvConfig, GroupParams};
use crate::error::{Error, Result};
use crate::trainer::{Algo, Mode, TrainConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    env: EnvSection,
    #[serde(default)]
    train: TrainSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    num_levels: usize,
    group_prior: f64,
    reward_success: f64,
    reward_default: f64,
    horizon: usize,
    plus: GroupSection,
    minus: GroupSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupSection {
    init_score_dist: Vec<f64>,
    repay_prob: Vec<f64>,
    /// Probabilities of drift -1, 0, +1 in that order.
    drift_dist: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    algo: Option<String>,
    mode: Option<String>,
    beta_kl: Option<f64>,
    beta_c: Option<f64>,
    beta_lambda: Option<f64>,
    learning_rate: Option<f64>,
    iterations: Option<usize>,
    episodes_per_iter: Option<usize>,
    minibatch_size: Option<usize>,
    epochs_per_batch: Option<usize>,
    epsilon: Option<f64>,
    adjusted_constraint: Option<bool>,
}

fn group_from_section(label: &str, section: GroupSection) -> Result<GroupParams> {
    if section.drift_dist.len() != 3 {
        return Err(Error::Config(format!(
            "{label}.drift_dist has {} entries, expected 3 (for drift -1, 0, +1)",
            section.drift_dist.len()
        )));
    }
    Ok(GroupParams {
        init_score_dist: section.init_score_dist,
        repay_prob: section.repay_prob,
        drift_dist: [
            section.drift_dist[0],
            section.drift_dist[1],
            section.drift_dist[2],
        ],
    })
}

fn apply_train_section(section: TrainSection) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(algo) = section.algo {
        cfg.algo = Algo::parse(&algo).ok_or_else(|| {
            Error::Config(format!(
                "unknown algo {algo:?}, expected ppo, ppo-c or ppo-cb"
            ))
        })?;
    }
    if let Some(mode) = section.mode {
        cfg.mode = Mode::parse(&mode).ok_or_else(|| {
            Error::Config(format!("unknown mode {mode:?}, expected oracle or sampled"))
        })?;
    }
    if let Some(v) = section.beta_kl {
        cfg.beta_kl = v;
    }
    if let Some(v) = section.beta_c {
        cfg.beta_c = v;
    }
    if let Some(v) = section.beta_lambda {
        cfg.beta_lambda = v;
    }
    if let Some(v) = section.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = section.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = section.episodes_per_iter {
        cfg.episodes_per_iter = v;
    }
    if let Some(v) = section.minibatch_size {
        cfg.minibatch_size = v;
    }
    if let Some(v) = section.epochs_per_batch {
        cfg.epochs_per_batch = v;
    }
    if let Some(v) = section.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = section.adjusted_constraint {
        cfg.adjusted_constraint = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse and validate a TOML configuration document.
pub fn parse_config(text: &str) -> Result<(EnvConfig, TrainConfig)> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let env = EnvConfig {
        num_levels: file.env.num_levels,
        group_prior: file.env.group_prior,
        groups: [
            group_from_section("plus", file.env.plus)?,
            group_from_section("minus", file.env.minus)?,
        ],
        reward_success: file.env.reward_success,
        reward_default: file.env.reward_default,
        horizon: file.env.horizon,
    };
    env.validate()?;
    let train = apply_train_section(file.train)?;
    Ok((env, train))
}

/// Load a configuration file from disk.
pub fn load_config(path: &Path) -> Result<(EnvConfig, TrainConfig)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    parse_config(&text)
}

fn shared_inits() -> [Vec<f64>; 2] {
    [
        // Plus group starts concentrated in the upper-middle levels.
        vec![0.02, 0.05, 0.10, 0.18, 0.25, 0.25, 0.15],
        // Minus group mirrors it toward the bottom.
        vec![0.15, 0.25, 0.25, 0.18, 0.10, 0.05, 0.02],
    ]
}

const REPAY_SETTING1: [f64; 7] = [0.45, 0.55, 0.65, 0.75, 0.83, 0.90, 0.95];
const REPAY_SETTING2: [f64; 7] = [0.30, 0.42, 0.54, 0.66, 0.76, 0.85, 0.92];
const DRIFT_SHARED: [f64; 3] = [0.1, 0.8, 0.1];

fn setting_with_repay(repay: &[f64; 7]) -> EnvConfig {
    let [init_plus, init_minus] = shared_inits();
    EnvConfig {
        num_levels: 7,
        group_prior: 0.5,
        groups: [
            GroupParams {
                init_score_dist: init_plus,
                repay_prob: repay.to_vec(),
                drift_dist: DRIFT_SHARED,
            },
            GroupParams {
                init_score_dist: init_minus,
                repay_prob: repay.to_vec(),
                drift_dist: DRIFT_SHARED,
            },
        ],
        reward_success: 1.0,
        reward_default: 2.0,
        horizon: 20,
    }
}

fn setting3() -> EnvConfig {
    let shared_init = vec![0.08, 0.12, 0.18, 0.24, 0.18, 0.12, 0.08];
    EnvConfig {
        num_levels: 7,
        group_prior: 0.5,
        groups: [
            GroupParams {
                init_score_dist: shared_init.clone(),
                repay_prob: REPAY_SETTING1.to_vec(),
                drift_dist: [0.05, 0.80, 0.15],
            },
            GroupParams {
                init_score_dist: shared_init,
                repay_prob: REPAY_SETTING1.to_vec(),
                drift_dist: [0.15, 0.80, 0.05],
            },
        ],
        reward_success: 1.0,
        reward_default: 2.0,
        horizon: 20,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["setting1", "setting2", "setting3"];

/// Resolve a named preset environment.
pub fn preset(name: &str) -> Result<EnvConfig> {
    let env = match name {
        "setting1" => setting_with_repay(&REPAY_SETTING1),
        "setting2" => setting_with_repay(&REPAY_SETTING2),
        "setting3" => setting3(),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}, expected one of {PRESET_NAMES:?}"
            )))
        }
    };
    env.validate()?;
    Ok(env)
}

/// Resolve either an explicit config file or a preset name. Exactly one
/// of the two must be given.
pub fn resolve_config(
    config: Option<&Path>,
    preset_name: Option<&str>,
) -> Result<(EnvConfig, TrainConfig)> {
    match (config, preset_name) {
        (Some(path), None) => load_config(path),
        (None, Some(name)) => Ok((preset(name)?, TrainConfig::default())),
        (Some(_), Some(_)) => Err(Error::Config(
            "pass either --config or --preset, not both".into(),
        )),
        (None, None) => Err(Error::Config(
            "an environment is required: pass --config <file> or --preset <name>".into(),
        )),
    }
}
