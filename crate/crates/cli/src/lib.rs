//! Command-line front end: TOML run configs, orchestration of the solver
//! library, and CSV/SVG artifacts.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
mod verify;

pub use config::{parse_config, Command, RunConfig};
pub use error::{CliError, Result};
pub use run::{run, Report};
