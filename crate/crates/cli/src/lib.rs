//! Scenario files, certification, simulation and Monte Carlo export for the
//! `formation` command.

pub mod commands;
pub mod error;
pub mod library;
pub mod schema;

pub use error::CliError;
pub use schema::ScenarioFile;
