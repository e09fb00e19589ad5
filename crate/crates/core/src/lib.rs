//! Hybrid beamforming simulator for a mmWave dual-function (communication +
//! sensing) downlink: constant-modulus RF precoding with a beampattern-MSE
//! budget, staged baseband design, blind phase-only receive combiners, and
//! Monte-Carlo experiment drivers.

pub mod beampattern;
pub mod channel;
pub mod combiner;
pub mod config;
pub mod error;
pub mod gmse;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod mm_surrogate;
pub mod precoder;
pub mod runner;

pub use config::{Objective, SolverConfig, SystemConfig};
pub use error::{Error, Result};
