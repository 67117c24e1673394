//! Monte-Carlo harness: configuration, runs, sweeps and result output.

pub mod config;
pub mod output;
pub mod run;
pub mod selftest;

pub use config::{EstimatorMode, NoiseKnowledge, SignalPath, SimConfig};
pub use output::{emit, to_csv, to_json, Format, CSV_HEADER};
pub use run::{
    median, median_nmse, nmse, run_point, run_single, sweep, Execution, RunOutcome, RunResult,
};
pub use selftest::{run_selftest, Check};
