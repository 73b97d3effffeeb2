//! Scenario configuration, execution and run manifests for the `hvquant` CLI.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{parse_config, ConfigError, ScenarioConfig, ScenarioKind};
pub use manifest::{RunManifest, RunStatus, MANIFEST_FILE, SENTINEL_FILE};
pub use run::{run, run_directory, RunOptions, OUT_ENV};
