//! Command-line companion to `advshift-core`: configuration files, CSV and
//! JSON emission, a parallel ensemble driver, and the runnable property
//! suites. Everything here is deterministic given (config, seed); worker
//! count never changes a single output byte.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod parallel;
pub mod verify;

pub use error::CliError;
