//! Pipeline orchestration for the place-recognition toolkit: dataset
//! ingestion, synthetic benchmark generation, training, matching, and
//! evaluation, plus the persisted model format.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod model_file;
pub mod plots;
pub mod synth;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use model_file::ModelFile;
