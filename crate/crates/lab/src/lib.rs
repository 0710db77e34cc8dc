//! Experiment runner for `feller-core`: JSON configs in, JSON/CSV reports
//! and a hashed manifest out.

// Negated comparisons are used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod emit;
pub mod error;
pub mod run;
pub mod schema;

pub use config::{parse_config, parse_config_str, parse_config_with, ExperimentConfig, Overrides};
pub use error::LabError;
pub use run::{output_hashes, run_experiment, RunManifest};
