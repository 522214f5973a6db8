//! Configuration, on-disk formats and the run/check/compare/fit commands.
//!
//! A run directory contains `config.toml` (the resolved configuration),
//! `series.csv`, optional `snapshots/*.bin`, `manifest.json` and, after
//! `check`, `report.json`.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod run;
pub mod series;
pub mod snapshot;

pub use commands::{
    cmd_check, cmd_compare, cmd_fit, cmd_run, CheckReport, CompareReport, RunOverrides,
};
pub use config::RunConfig;
pub use manifest::{RunManifest, RunStatus};
pub use run::{execute, RunOutcome};
pub use series::SeriesTable;
