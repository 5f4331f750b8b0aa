//! Near-field beamforming in obstructed two-dimensional scenes.
//!
//! The crate propagates aperture fields through obstacle-laden scenes with
//! the angular spectrum method, generates steered, focused, curved and Airy
//! excitations, builds beam codebooks, factorizes beams for hybrid
//! analog/digital hardware and runs beam-training searches.

pub mod airy;
pub mod codebooks;
pub mod error;
pub mod hybrid;
pub mod propagation;
pub mod scenario;
pub mod training;
pub mod waveforms;

pub use error::{Error, Result};
pub use scenario::{ArrayGeometry, GridConfig, Obstacle, Scenario, ScenarioConfig, Weights};

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
