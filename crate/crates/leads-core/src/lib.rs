//! Unsupervised skill discovery driven by successor state measures.
//!
//! The crate is organized in three tiers. `env` provides the point-mass
//! mazes, the torque-limited arm, and a discrete gridworld. `tabular`
//! computes exact successor measures, mutual-information bounds, and the
//! target-selection uncertainty score on finite MDPs; these are the ground
//! truth everything else is validated against. `nn`, `clearning`, and
//! `algo` implement the neural estimator (a contrastive classifier over
//! state pairs) and the full training loop; `metrics` and `runner` handle
//! coverage accounting and run artifacts.

pub mod algo;
pub mod clearning;
pub mod config;
pub mod env;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod runner;
pub mod tabular;

pub use error::{Error, Result};
