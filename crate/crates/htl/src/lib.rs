//! File formats, a thread-pool executor and the `htl` command line on top of
//! [`htl_core`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod features;
mod json;
pub mod model;
pub mod records;
pub mod summary;
mod tsv;

pub use error::{Error, Result};
pub use exec::RayonExecutor;
