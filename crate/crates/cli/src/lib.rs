// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line surface and Monte-Carlo benchmark harness for `irregcp`.

#![forbid(unsafe_code)]

pub mod bench;
pub mod commands;
pub mod error;
pub mod grid;
pub mod io;

pub use commands::{execute, Cli};
pub use error::{CliError, Result};
pub use grid::{ExperimentGrid, Method};
