//! Slot-based scheduling of service function chains (SFCs) over a
//! time-expanded space-air-ground network.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: node placement, satellite motion and the time-expanded graph.
//! - [`channel`]: link budgets and per-slot link capacities.
//! - [`energy`]: UAV/satellite energy accounting.
//! - [`workload`]: SFC requests.
//! - [`env`]: the slot-stepped scheduling environment, schedule log and validator.
//! - [`learn`]: dense Q-networks, tabular learners and the training loop.
//! - [`oracle`]: exhaustive solver for tiny instances.
//! - [`config`] / [`experiment`]: run configuration and the experiment runner.
//!
//! Numerical kernels (link budgets, energy formulas, the dense network) are
//! generic over [`Scalar`]; the aliases below fix the common precisions.

pub mod channel;
pub mod config;
pub mod energy;
pub mod env;
mod error;
pub mod experiment;
pub mod learn;
pub mod oracle;
mod scalar;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision dense Q-network.
pub type DenseNet64 = learn::DenseNet<f64>;
/// Single-precision dense Q-network.
pub type DenseNet32 = learn::DenseNet<f32>;
/// Double-precision radio constants.
pub type Radio = channel::RadioConstants<f64>;
/// Double-precision energy parameters.
pub type EnergyParams64 = energy::EnergyParams<f64>;
/// DQN-family agent over `f64`.
pub type DqnAgent64 = learn::DqnAgent<f64>;
/// DQN-family agent over `f32`.
pub type DqnAgent32 = learn::DqnAgent<f32>;
