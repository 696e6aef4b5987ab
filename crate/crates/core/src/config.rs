//! The run configuration: one JSON document covering the instrument, the
//! solver weights, the technique targets, quantization, and the seed.
//! Unknown keys are rejected so typos never silently fall back to
//! defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::TechniqueTargets;
use crate::fretboard::InstrumentSpec;
use crate::midi::VALID_GRIDS;
use crate::solver::FingeringConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub instrument: InstrumentSpec,
    pub fingering: FingeringConfig,
    pub techniques: TechniqueTargets,
    /// Quantization grid in subdivisions per quarter note.
    pub quantize_grid: u16,
    /// Seed for every random decision in the pipeline.
    pub seed: u64,
    /// Default input path; a command-line argument overrides it.
    pub input: Option<PathBuf>,
    /// Default output path; a command-line argument overrides it.
    pub output: Option<PathBuf>,
    /// 0 silences progress reporting.
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instrument: InstrumentSpec::default(),
            fingering: FingeringConfig::default(),
            techniques: TechniqueTargets::default(),
            quantize_grid: 4,
            seed: 0,
            input: None,
            output: None,
            verbosity: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.instrument.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.fingering.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.techniques.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !VALID_GRIDS.contains(&self.quantize_grid) {
            return Err(ConfigError::Invalid(format!(
                "quantize_grid {} not in {VALID_GRIDS:?}",
                self.quantize_grid
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let config = RunConfig::default();
        let text = config.to_json_pretty();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{ "sede": 12 }"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn partial_configs_fill_defaults() {
        let config = RunConfig::from_json(r#"{ "seed": 9 }"#).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.quantize_grid, 4);
        assert_eq!(config.instrument, InstrumentSpec::standard_guitar());
    }

    #[test]
    fn bad_grid_is_rejected() {
        let err = RunConfig::from_json(r#"{ "quantize_grid": 5 }"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn nested_validation_runs() {
        let err = RunConfig::from_json(r#"{ "fingering": { "w_pc": -2.0 } }"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        let err =
            RunConfig::from_json(r#"{ "instrument": { "string_count": 2, "open_pitches": [64], "fret_count": 22 } }"#)
                .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }
}
