//! Configuration, orchestration and report emission for the `mixrate` CLI.

pub mod config;
pub mod invariants;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{fit_loglog_slope, RateReport, RateRow, Verdict};
pub use run::{run, run_config, RunOutcome};
