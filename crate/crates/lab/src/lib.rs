//! Experiment harness: config parsing, seeded multi-trial runs for the
//! three problem families, CSV/JSON outputs, and transfer evaluation.

pub mod config;
pub mod experiment;
pub mod presets;
pub mod transfer;

mod csvio;
mod error;

pub use error::{LabError, LabResult};
