//! Simulator and reinforcement-learning harness for IRS-assisted multi-UAV
//! downlink networks. Agents pick UAV transmit powers and IRS phase shifts to
//! maximize network energy efficiency.

pub mod channel;
pub mod check;
pub mod config;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod plot;
pub mod ppo;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
