//! Declarative scenarios for the `pmcf` flow library: TOML configs, presets,
//! artifact writing and the invariant verification suite.

pub mod config;
pub mod presets;
pub mod scenario;
pub mod verify;

pub use config::{parse_config, parse_str, ConfigError, ScenarioConfig, ScenarioKind};
pub use scenario::{execute, run_scenario, write_artifacts, CheckResult, Outcome, RunError, RunSummary};
pub use verify::{verify_suite, VerifyOptions, VerifyReport};
