//! A desk-scale laboratory for long-term fairness in sequential lending.
//!
//! The crate simulates a bank approving or denying loans to individuals
//! from two sensitive groups whose credit scores evolve in response to
//! the decisions. It measures long-term fairness as the gap in expected
//! cumulative qualification gain between the groups, decomposes that gap
//! into direct, delayed and environment-only effects, relates the direct
//! effect to benefit fairness, and trains tabular softmax policies with
//! penalized PPO variants that trade profit against those fairness
//! readouts.
//!
//! Modules:
//! - [`env`]: the lending MDP (sampling, transitions, gains, rewards).
//! - [`policy`]: tabular softmax policies and exact log-prob gradients.
//! - [`analysis`]: exact value/visitation tables, effect decomposition,
//!   benefit fairness and Wasserstein readouts.
//! - [`enumeration`]: brute-force trajectory enumeration for small
//!   instances, used to cross-check the dynamic programming.
//! - [`counterfactual`]: rank-preserving couplings and the
//!   baseline-qualification adjustment.
//! - [`trainer`]: penalized PPO in oracle and sampled modes.
//! - [`harness`]: config files, presets, CSV/SVG emission and multi-seed
//!   experiment orchestration.

pub mod analysis;
pub mod counterfactual;
pub mod enumeration;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod trainer;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
