//! Configuration, batch execution, sweeps, and artifact emission for the
//! measurement-driven qubit clock simulator. The binary is `stoq-clock`;
//! everything it does is also available through this library.

pub mod config;
pub mod error;
pub mod harness;

pub use config::{config_load, Model, Regime, RunConfig};
pub use error::CliError;
pub use harness::{run_analyze, run_simulate, run_sweep, RunManifest, SweepVar, OUT_ROOT_ENV};
