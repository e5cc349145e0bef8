//! Quadrotor moving-platform landing laboratory.
//!
//! A self-contained, deterministic simulation of a small quadrotor landing on
//! a moving platform, together with everything needed to train and evaluate
//! controllers on that task:
//!
//! - [`sim`] — fixed-timestep rigid-body dynamics with a cascaded PID inner loop
//! - [`platform`] — moving-pad trajectory families (static, linear, curved, 3D)
//! - [`wind`] — probabilistic gust injection and the impeller jet disturbance
//! - [`env`] — the episode loop: observations, action mapping, termination
//! - [`reward`] — branched potential-field reward
//! - [`neural`] — dense MLP with backpropagation and Adam, plus checkpoints
//! - [`td3`] — Twin Delayed DDPG learner (replay buffer, twin critics, targets)
//! - [`ekf`] — constant-velocity Kalman tracker + PID pursuit baseline
//! - [`eval`] — scenario runner, metrics (success, precision, correlations)
//! - [`config`] — one structured config file driving all of the above
//!
//! Every random draw flows through explicitly seeded streams ([`rng`]), so
//! every pipeline (reset, rollout, training, reporting) is bit-reproducible.

pub mod config;
pub mod ekf;
pub mod env;
pub mod error;
pub mod eval;
pub mod neural;
pub mod platform;
pub mod plot;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod td3;
pub mod wind;

pub use error::{Error, Result};
