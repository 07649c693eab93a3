//! Simulation and analysis of polarization-entangled photon pairs from a
//! collinear type-II down-conversion source split by a non-polarizing beam
//! splitter.
//!
//! The crate covers the two-photon state algebra, linear-optics elements, a
//! temperature-calibrated source model, closed-form predictions, a Monte
//! Carlo time-tag generator with its binary file format, a streaming
//! coincidence engine and the scan drivers built on top of them.

pub mod coincidence;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod optics;
pub mod predictions;
pub mod quantum;
pub mod setups;
pub mod source;
pub mod timetag;

pub use error::{Error, Result};
pub use num_complex::Complex64;
