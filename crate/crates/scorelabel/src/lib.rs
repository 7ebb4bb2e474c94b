//! File formats, run configuration and the `scorelabel` command line around
//! [`scorelabel_core`].
//!
//! [`stages::run_pipeline`] runs the whole method from a [`RunConfig`]: toy or CSV
//! data, ODE labeling, generator training, sampling and per-dimension evaluation.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod manifest;
pub mod model_file;
pub mod stages;

pub use config::{RunConfig, Seeds};
pub use error::{Error, Result};
pub use manifest::TimingReport;
pub use stages::{run_pipeline, PipelineOutcome};
