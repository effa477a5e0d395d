//! Experiment driver behind the CLI: fail-closed JSON configs, deterministic
//! seeded pipelines (solve / compose / certify / bench / plotdata / verify /
//! gen), and machine-readable CSV + JSON reports with provenance.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{
    cmd_bench, cmd_certify, cmd_compose, cmd_gen, cmd_plotdata, cmd_solve, cmd_verify,
    CommandError, RunOptions,
};
pub use config::{load_config, parse_config, strict_from_value, ConfigError, ExperimentConfig};
pub use report::{MetricRow, ReportDocument, RolloutRow};
