//! Run configuration: one TOML file with sections mirroring the module
//! structure. Unknown keys are rejected; every run embeds the hash of the
//! resolved configuration in its outputs so reruns are verifiable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ledger::SensitivityLedger;
use crate::noise::NoiseConfig;
use crate::physics::PhysicsConfig;
use crate::sim::{DriftModel, Injected, Schedule, ServoConfig, TraceTemplate};

/// Full configuration of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsConfig,
    pub noise: NoiseConfig,
    pub drift: DriftModel,
    pub servo: Option<ServoConfig>,
    pub schedule: Schedule,
    pub injected: Injected,
    /// Peak geometry for synthetic fluorescence traces, when emitted.
    pub trace: Option<TraceTemplate>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self, ledger: &SensitivityLedger) -> Result<()> {
        self.physics.validate()?;
        self.noise.validate()?;
        self.drift.validate(ledger)?;
        self.schedule.validate()?;
        self.injected.validate()?;
        if let Some(servo) = &self.servo {
            servo.validate()?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the resolved configuration.
    pub fn resolved_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Manifest written next to every simulation output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_shots: u64,
    /// Fitted ellipses per mass configuration per modulation period.
    pub ellipses_per_config_period: u64,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            schema_version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.resolved_hash(),
            seed: config.noise.seed,
            n_shots: config.schedule.n_shots,
            ellipses_per_config_period: config.schedule.ellipses_per_config_period(),
        }
    }
}
