//! Synthetic driver bundles with known ground truth.
//!
//! Each driver works randomly chosen days. A day is one app session in which
//! dispatch offers arrive after exponential standby gaps; accepted offers
//! become trips (a few cancelled by the rider), and each completed trip is
//! priced by the fare rule in force. Under fixed commission the driver gets
//! exactly `1 − c` of the fare. During the opaque-fare era the exported fare
//! column holds the driver's pay instead of the rider's price. Under dynamic
//! pricing the driver's share is drawn from a fare-dependent clamped normal.
//!
//! Every driver has its own random stream derived from the seed, so drivers
//! are simulated in parallel and the output is byte-identical for a given
//! configuration.

mod config;
mod generate;
mod truth;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{CohortConfig, Corruptions, FareEpoch, FareRule, GenConfig, ShareModel};
pub use generate::{generate, PII_MARKER};
pub use truth::{CorruptionRecord, DriverTruth, GroundTruth, Pairing, ShareBinTruth, ShareTruth, WeekTruth};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("writing {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("serialising ground truth: {0}")]
    Serialize(String),
}

impl GroundTruth {
    pub fn load(path: &std::path::Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| SynthError::Serialize(e.to_string()))
    }
}
