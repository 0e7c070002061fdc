//! File formats, experiment harness and command line for `netsep-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod model;

pub use netsep_core as core;

pub use crate::error::{Error, Result};
