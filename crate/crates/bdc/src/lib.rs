//! File formats, reports and the `bdc` command-line tool on top of `bdc-core`.

pub mod cli;
pub mod error;
pub mod export;
pub mod formats;
pub mod pipeline;

pub use error::{Error, Result};
