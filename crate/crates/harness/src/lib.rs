//! Batch experiments for the offloading policies: config files, parallel
//! seed sweeps, CSV tables and SVG plots.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod svg;

pub use config::{parse_config, parse_config_str, ExperimentConfig, Overrides, PlotToggles, PolicyGroup, PolicySpec};
pub use error::{HarnessError, Result};
pub use output::{emit_outputs, read_results_csv, report, write_results_csv};
pub use runner::{run_experiment, ExperimentOutput, ResultRow, RunRecord};
