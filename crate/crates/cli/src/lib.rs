//! Command-line orchestration for `hke-core`: envelope tables, simulations,
//! sandwich fitting and the verification criteria.

pub mod commands;
pub mod config;
pub mod error;
pub mod sandwich;
pub mod verify;

pub use commands::{Output, Report, SCHEMA};
pub use config::{FileConfig, Overrides, Settings};
pub use error::{CliError, CliResult};
pub use sandwich::{sandwich_check, SandwichPoint, SandwichResult};
pub use verify::{Criterion, CriterionOutcome, VerifyOptions};
