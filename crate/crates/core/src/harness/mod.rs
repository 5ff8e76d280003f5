//! Experiment runner: the closed bandit loop, multi-arm sweeps, metrics files and plots.

pub mod config;
pub mod metrics;
pub mod output;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{default_arms, AgentMode, ArmSpec, BasisSpec, ExperimentConfig, LogSpec, SweepConfig};
pub use metrics::{curve_transform, log_curve, max_normalize, normalize_group, MetricsRow, MetricsTracker};
pub use output::{metrics_file_name, read_metrics, write_demand_table, write_metrics, write_summary};
pub use run::{build_environment, derive_seed, run_experiment, RunResult};
pub use sweep::{run_sweep, thread_limit, ArmSummary, SweepResult};
