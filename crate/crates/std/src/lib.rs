//! Command-line experiments on top of `tbs_noma_core`: config files, CSV
//! output, parallel campaigns and the self-check report.

pub mod error;
pub mod experiment;
pub mod oracle;
pub mod parallel;
pub mod spec;
pub mod validate;

pub use error::CliError;
pub use tbs_noma_core as core;
