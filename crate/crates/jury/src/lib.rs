//! Datasets, experiments and reports built on `jury-core`: vote CSV and
//! manifest formats, labels files, corpus-based reproduction of the
//! classification and jury tables, and the `jury` command line.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod format;
pub mod reference;
pub mod report;

pub use error::{Error, Result};
pub use jury_core as core;
