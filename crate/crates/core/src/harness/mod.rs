//! Experiment surface behind the `dp-spider` binary: JSON configuration,
//! seeded multi-run experiments, (n, d, ε) sweeps with CSV export, record
//! verification by exact re-execution, and scaling-law reports.

pub mod config;
pub mod experiment;
pub mod gridspec;
pub mod record;
pub mod report;
pub mod sweep;

pub use config::ExperimentConfig;
pub use experiment::{replay_record, run_experiment, ExperimentOutput};
pub use gridspec::GridSpec;
pub use record::{read_records, write_records, ResultRecord, RunStatus};
pub use report::{scaling_report, ScalingReport};
pub use sweep::{run_sweep, sweep_from_csv, sweep_to_csv, SweepRow};
