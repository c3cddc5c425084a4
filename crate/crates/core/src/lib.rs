//! Stochastic model of a free-space Rydberg-blockade single-photon absorber.
//!
//! The crate is `no_std` (it needs `alloc`) so it can be embedded anywhere the
//! estimators are useful. IO, configuration and the command-line front end live
//! in the `rydabs` crate.
//!
//! Modules follow the data flow of one simulated experiment:
//!
//! * [`pulse`]: Tukey envelopes and Poissonian per-bin photon sampling.
//! * [`absorber`]: bin-wise Monte-Carlo absorption, ensembles and cascades.
//! * [`detector`]: efficiency thinning, HBT splitting and ion detection.
//! * [`stats`]: Mandel-Q, pair-averaged g2, pulse shapes and standard errors.
//! * [`analytic`]: closed-form transmission and ion statistics used as oracles.
//! * [`bloch`]: weak-probe three-level spectrum and dephasing fit.

#![no_std]

extern crate alloc;

pub mod absorber;
pub mod analytic;
pub mod bloch;
pub mod detector;
mod error;
pub mod pulse;
pub mod rng;
pub mod stats;

pub use absorber::{AbsorberParams, CascadeResult, EnsembleResult, Experiment, ShotRecord};
pub use detector::{ClickRecord, DetectorConfig, DETECTORS};
pub use error::{Error, Result};
pub use pulse::{BinnedCounts, PulseSpec};
