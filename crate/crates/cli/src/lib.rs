//! Configuration, experiment drivers and validation for the `kvlink` tool.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
