//! File formats, model persistence, experiments and the command-line
//! driver for the tensor product multilevel method in `tpml-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod experiments;
pub mod model_file;

pub use error::{CliError, ErrorKind, Result};
