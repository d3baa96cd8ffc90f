//! Library side of the `rejaug` command-line tool: run manifests, CSV
//! ingestion, the subcommands and the desk-scale simulation studies.

pub mod commands;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod studies;

pub use error::CliError;
