//! JSON file formats for scenarios and policies.
//!
//! A scenario file lists its epochs in time order. `battery` is the capacity
//! in μJ, or `null` for an unbounded battery:
//!
//! ```json
//! {
//!   "processing_cost": 0.25,
//!   "battery": 10.0,
//!   "epochs": [
//!     { "duration": 3.5, "energy": 9.0, "data": 0.5, "gains": [0.8, 0.35] }
//!   ]
//! }
//! ```
//!
//! A policy file holds per-epoch rows of powers (μW) and durations (s).

use std::fs;
use std::path::Path;

use gluepour_core::{Capacity, Epoch, Matrix, Policy, Scenario};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochFile {
    pub duration: f64,
    pub energy: f64,
    #[serde(default)]
    pub data: f64,
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub processing_cost: f64,
    #[serde(default)]
    pub battery: Option<f64>,
    pub epochs: Vec<EpochFile>,
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let epochs = self
            .epochs
            .iter()
            .map(|e| Epoch::new(e.duration, e.energy, e.data, e.gains.clone()))
            .collect();
        let battery = self.battery.map_or(Capacity::Unbounded, Capacity::Finite);
        Ok(Scenario::new(epochs, self.processing_cost, battery)?)
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            processing_cost: s.processing_cost(),
            battery: s.battery().limit(),
            epochs: s
                .epochs()
                .iter()
                .map(|e| EpochFile { duration: e.duration, energy: e.energy, data: e.data, gains: e.gains.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub power: Vec<Vec<f64>>,
    pub duration: Vec<Vec<f64>>,
}

impl PolicyFile {
    pub fn to_policy(&self) -> Result<Policy> {
        Ok(Policy::new(Matrix::from_rows(&self.power)?, Matrix::from_rows(&self.duration)?)?)
    }
}

impl From<&Policy> for PolicyFile {
    fn from(p: &Policy) -> Self {
        PolicyFile { power: p.power.to_rows(), duration: p.duration.to_rows() }
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { context: path.display().to_string(), source })
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    read_json::<ScenarioFile>(path)?.to_scenario()
}

pub fn read_policy(path: &Path) -> Result<Policy> {
    read_json::<PolicyFile>(path)?.to_policy()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| HarnessError::Json { context: path.display().to_string(), source })?;
    fs::write(path, text + "\n").map_err(|source| HarnessError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_round_trip() {
        let text = r#"{"processing_cost":0.25,"battery":null,
            "epochs":[{"duration":2,"energy":3,"data":0.5,"gains":[1,0.5]}]}"#;
        let file: ScenarioFile = serde_json::from_str(text).unwrap();
        let s = file.to_scenario().unwrap();
        assert!(s.battery().is_unbounded());
        assert_eq!(s.shape(), (1, 2));
        assert_eq!(ScenarioFile::from(&s), file);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"{"epochs":[],"capacity":3}"#;
        assert!(serde_json::from_str::<ScenarioFile>(text).is_err());
    }

    #[test]
    fn ragged_policy_is_an_error() {
        let p = PolicyFile { power: vec![vec![1.0, 2.0], vec![1.0]], duration: vec![vec![1.0, 1.0], vec![1.0]] };
        assert!(p.to_policy().is_err());
    }
}
