//! Command-line harness: sweeps, calibration, scenarios and plots on top of
//! `evsim-core`.

pub mod calibration;
pub mod commands;
pub mod experiments;
pub mod plot;
pub mod table;

pub use commands::{main_with, Cli, CliError};
