//! Experiment runner for `nfbeam`: JSON configs in, CSVs, grayscale
//! heatmaps and a checksummed manifest out.

pub mod channels;
pub mod config;
pub mod error;
pub mod experiments;
pub mod heatmap;
pub mod output;
pub mod stats;
pub mod users;

pub use config::{ExperimentConfig, ExperimentKind, HeatmapScale, UserRegion};
pub use error::{HarnessError, Result};
pub use experiments::{config_hash, evaluate_users, run_experiment, UserOutcome};
pub use heatmap::export_heatmap;
pub use output::RunManifest;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NFBEAM_OUT_DIR";
