//! Seeded multi-trial experiment orchestration: configuration, the
//! runner, and CSV artifact emission.

mod config;
mod csv;
mod runner;

pub use config::{resolve, ConfigOverlay, ExperimentConfig, ExperimentKind};
pub use csv::{write_csv, write_text};
pub use runner::{run_experiment, run_from_overlay, RunSummary, HEATMAP_CHECKPOINTS};
