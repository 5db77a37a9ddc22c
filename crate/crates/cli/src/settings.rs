//! TOML configuration file. Every section and key is optional; missing
//! values fall back to the built-in defaults and command-line flags override
//! whatever the file sets.

use std::path::Path;

use mfaoi::{FixedPointConfig, SystemConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    /// Small-scale fading on or off; `system.rician_k` sets its K-factor.
    pub fading: bool,
    pub system: SystemConfig,
    pub fixed_point: FixedPointConfig,
    pub calibration: CalibrationSettings,
    pub sweep: SweepSettings,
    pub baseline: BaselineSettings,
    pub validate: ValidateSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            fading: true,
            system: SystemConfig::default(),
            fixed_point: FixedPointConfig::default(),
            calibration: CalibrationSettings::default(),
            sweep: SweepSettings::default(),
            baseline: BaselineSettings::default(),
            validate: ValidateSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub trials: u64,
    pub load_max: f64,
    pub load_step: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            trials: 20_000,
            load_max: 24.0,
            load_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            eta_min: 1e-3,
            eta_max: 1e2,
            eta_points: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    /// Energy levels evaluated, evenly spaced from 0 to the largest action
    /// energy for the randomized curve and to `2 - α` for the repetition
    /// curves.
    pub energy_points: usize,
    pub alphas: Vec<f64>,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            energy_points: 41,
            alphas: vec![0.1, 0.5, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSettings {
    pub eta: f64,
    pub frames: u64,
    /// Defaults to 10% of `frames`, at least 500.
    pub warmup: Option<u64>,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self {
            eta: 10.0,
            frames: 50_000,
            warmup: None,
        }
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut settings: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if !settings.fading {
            settings.system.rician_k = None;
        }
        Ok(settings)
    }
}
