//! File formats, configuration and subcommands of the `uatrack` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod kitti;

pub use commands::{run, Cli};
pub use config::RunConfig;
pub use error::{FormatError, FormatResult};
