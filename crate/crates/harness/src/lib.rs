//! Experiment harness for the distributed Kaczmarz simulator: config
//! documents, presets, seeded batch runs and report files.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod report;

pub use config::{parse_config, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use output::emit_csv;
pub use presets::{preset_cases, PresetCase, PRESETS};
pub use report::{run_experiment, RunReport};
