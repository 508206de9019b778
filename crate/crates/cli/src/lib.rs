//! Config-driven runner for the qbound toolkit: bound tables, scaling fits,
//! QSNR studies, the thermal-state property suite and self-validation.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use run::{execute, execute_config, Command, Options, Outcome};

pub const SCHEMA_VERSION: u32 = 1;
