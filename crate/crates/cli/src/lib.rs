//! Experiment runner for the thermoelastic enclosure method: JSON
//! configuration, the ASCII mesh format, CSV and VTK output, validation
//! suites and the full pipeline.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod meshio;
pub mod output;
pub mod pipeline;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{CliError, Stage};
