//! Simulator around `cfrelay_core`: configuration files, the block pipeline
//! with the relay's one-block delay, Monte Carlo sweeps, CSV/SVG output and
//! the on-disk formats for codes and quantizers.

pub mod config;
pub mod files;
pub mod report;
pub mod sim;

pub use config::{ConfigError, Scheme, SimConfig};
pub use sim::{compare_baselines, run_sweep, SweepResult, SweepRow};
