//! Link-level model of downlink two-user NOMA with threshold-based selective
//! cooperation: the near user decodes the far user's symbol by SIC and
//! forwards it only when its SINR clears a threshold.
//!
//! * [`constellation`]: mappings, superposition, SIC and combining detectors.
//! * [`analytic`]: closed-form average BER of the far user.
//! * [`threshold`]: closed-form and brute-force optimum thresholds.
//! * [`sim`]: reproducible Monte Carlo over Rayleigh block fading.
#![no_std]
extern crate alloc;

pub mod analytic;
pub mod constellation;
mod error;
pub mod sim;
pub mod special;
pub mod threshold;
pub mod units;

pub use error::Error;
