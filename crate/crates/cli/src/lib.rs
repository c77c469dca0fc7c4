//! Scenario and config I/O plus the subcommands behind the `datagather`
//! binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod scenario;

pub use commands::{cmd_plan, cmd_simulate, cmd_sweep, Band, SimReport, SweepReport, SweepRow};
pub use error::{CliError, ScenarioError};
pub use scenario::{export_scenario, load_scenario, parse_scenario};
