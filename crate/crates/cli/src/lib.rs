//! Config-driven runner around `dielq-core`: JSON configs in, mode-bank
//! files, CSV spectra and JSON summaries out.

pub mod bankfile;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod verify;

pub use bankfile::{load_bank, save_bank};
pub use config::RunConfig;
pub use error::RunError;
pub use pipeline::{run, run_file, RunOptions, RunSummary};
