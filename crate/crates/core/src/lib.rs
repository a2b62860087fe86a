//! Incentive-compatible exploration for Bayesian multi-armed bandits.
//!
//! Agents follow a recommendation only when it maximizes their posterior expected
//! reward. This crate computes the prior-dependent constants that make exploration
//! compatible with that constraint, builds the recommendation policies and phase
//! schedules that achieve it, runs them against simulated environments, and audits
//! the incentive margins exactly (by enumeration) or by Monte Carlo.
//!
//! - [`priors`]: Beta and finite-support priors, posterior-mean laws, dominance, couplings.
//! - [`params`]: warm-start, padding and bootstrap constants, lower bounds, round budgets.
//! - [`game`]: the recommendation game solver and padded recommendation policies.
//! - [`algos`]: Thompson sampling, exploitation and the phase-scheduled algorithms.
//! - [`audit`]: BIC margins, explorability and tail checks.
//! - [`harness`]: configuration, experiment runs, sweeps and artifacts.

pub mod algos;
pub mod audit;
pub mod error;
pub mod game;
pub mod harness;
pub mod num;
pub mod params;
pub mod priors;
pub mod rng;

pub use error::{Error, Result};
