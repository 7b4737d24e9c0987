//! File formats, command-line interface and multi-threaded drivers for
//! `transducer-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod model_file;
pub mod parallel;

pub use error::{CliError, Result};
