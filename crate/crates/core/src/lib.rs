//! Adaptive multilevel splitting for rare transitions of overdamped Langevin
//! dynamics, with committor solvers, a direct Monte-Carlo baseline, ensemble
//! statistics and a three-level Markov model of reactive durations.

pub mod ams;
pub mod committor;
pub mod dns;
pub mod ensemble;
pub mod error;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod three_level;

pub use error::{Error, Result};
