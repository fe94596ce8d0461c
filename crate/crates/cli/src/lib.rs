//! Pipeline orchestration over an on-disk dataset: simulation, noise
//! analysis, feature extraction, CRF refinement, grid search, evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod plot;

pub use commands::{run_pipeline, Context};
pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
