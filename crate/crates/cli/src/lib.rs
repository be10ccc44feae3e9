//! Experiment harness behind the `mfvi` binary.

pub mod bench;
pub mod config;
pub mod count;
pub mod error;
pub mod output;
pub mod train;

pub use error::{CliError, CliResult};
