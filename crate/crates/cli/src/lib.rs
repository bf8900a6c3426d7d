//! Batch front-end for barcodelab.
//!
//! Each subcommand reads a [`config::RunConfig`], computes with
//! `barcodelab-core` and writes CSV or JSON into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod validate;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use validate::{ClosedForms, ValidationPlan, ValidationReport};
