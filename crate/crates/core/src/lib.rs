//! Simulation and statistics library for a measurement-driven superconducting
//! qubit clock.
//!
//! The crate integrates the conditional (homodyne-monitored) cavity–qubit
//! stochastic master equation and its adiabatic reductions, extracts clock
//! signals from the measurement record, and quantifies clock accuracy against
//! measurement strength and dissipated power.

pub mod adiabatic;
pub mod error;
pub mod hilbert;
pub mod matrix;
pub mod noise;
pub mod signal;
pub mod sme;
pub mod stats;

pub use error::CoreError;
pub use matrix::CMatrix;
