//! Learning an arrow of time from reachability: analytic Markov-chain
//! potentials, environment rollouts, a neural h-potential, the intrinsic
//! rewards built on it, and a free-energy check for Fokker-Planck dynamics.

// `!(x > 0.0)` style checks are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod config;
pub mod env;
pub mod error;
pub mod jko;
pub mod model;
pub mod rewards;
pub mod sampling;
pub mod seed;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
