//! Simulation and estimation toolkit for multi-ensemble optical-clock
//! metrology in tweezer arrays.
//!
//! Site-resolved qubit rotations are programmed as sub-wavelength atom moves:
//! displacing an atom by `Δx` along the drive beam rotates its local drive
//! frame by `k·Δx`. On top of that primitive the crate provides
//!
//! - [`qubit`]: exact single-qubit evolution, projective sampling, tomography;
//! - [`noise`]: stochastic laser-phase trajectories and SPAM error channels;
//! - [`sequence`]: a pulse-sequence IR, protocol compilers and timing analysis;
//! - [`simulate`]: a multi-site executor for compiled sequences;
//! - [`estimation`]: dual-quadrature phase inversion, folded-Gaussian fits,
//!   phase-slip probability, maximum interrogation time and gain;
//! - [`multi_ensemble`]: cascaded unwrapping across ensembles with
//!   geometrically reduced sensitivity.
//!
//! Angles are radians, distances nanometers, sequence durations microseconds.
//! Laser-noise parameters use a separate "fit" time unit, see
//! [`noise::LaserNoiseParams::time_unit_us`].

pub mod error;
pub mod estimation;
pub mod fit;
pub mod multi_ensemble;
pub mod noise;
pub mod qubit;
pub mod rng;
pub mod sequence;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
