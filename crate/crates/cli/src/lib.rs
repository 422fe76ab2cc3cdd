//! Configuration-driven experiments for shockform: run the pipeline, write
//! CSV and SVG artifacts and a JSON report, and verify reported figures.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod report;
pub mod svg;
pub mod synth;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, ExperimentError};
pub use report::{verify_figures, Expectations, Report};
