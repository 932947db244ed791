//! Experiment configuration, multi-trial suites and output files.

pub mod config;
pub mod grid;
pub mod suite;

pub use config::*;
pub use grid::{emit_bounds, BoundsOutput, GridPoint};
pub use suite::{check_view, run_suite, CheckLine, RowFormat, SuiteOptions, SuiteSummary, TrialReport};
