//! Registry of reference scenarios and the values they must reproduce.
//!
//! The registry ships as `data/golden.json`. Each check names a scenario, a
//! metric, the processing cost to evaluate at, and an expected value with an
//! absolute tolerance. `origin` records where the expected value comes from:
//! `reference` for externally published numbers, `computed` for values
//! derived from the model itself.

use std::collections::BTreeMap;

use gluepour_core::{check_feasibility, solve_offline_energy, solve_offline_throughput, solve_tct, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::ScenarioFile;

pub const REGISTRY_JSON: &str = include_str!("../data/golden.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Offline throughput, nats.
    Throughput,
    /// Offline remaining energy, μJ.
    RemainingEnergy,
    /// Data delivered by the energy-optimal policy, nats.
    Delivered,
    /// 1 when all data can be delivered, else 0.
    Feasible,
    /// Minimum completion time, s.
    CompletionTime,
    /// Energy left at the minimum completion time, μJ.
    CompletionEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenCheck {
    pub name: String,
    pub scenario: String,
    pub metric: Metric,
    pub processing_cost: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    pub scenarios: BTreeMap<String, ScenarioFile>,
    pub checks: Vec<GoldenCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenOutcome {
    pub name: String,
    pub expected: f64,
    pub tolerance: f64,
    pub actual: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

impl Registry {
    pub fn builtin() -> Self {
        serde_json::from_str(REGISTRY_JSON).expect("bundled registry parses")
    }

    pub fn scenario(&self, name: &str) -> Result<Scenario> {
        self.scenarios
            .get(name)
            .ok_or_else(|| {
                let known: Vec<&str> = self.scenarios.keys().map(String::as_str).collect();
                HarnessError::Config(format!("unknown golden scenario {name:?}; known: {}", known.join(", ")))
            })?
            .to_scenario()
    }

    pub fn run(&self) -> Vec<GoldenOutcome> {
        self.checks.iter().map(|c| self.run_check(c)).collect()
    }

    pub fn run_check(&self, c: &GoldenCheck) -> GoldenOutcome {
        let actual = self.scenario(&c.scenario).and_then(|s| evaluate(&s.with_processing_cost(c.processing_cost), c.metric));
        let (actual, error) = match actual {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let passed = actual.is_some_and(|v| (v - c.expected).abs() <= c.tolerance);
        GoldenOutcome { name: c.name.clone(), expected: c.expected, tolerance: c.tolerance, actual, passed, error }
    }
}

pub fn evaluate(s: &Scenario, metric: Metric) -> Result<f64> {
    Ok(match metric {
        Metric::Throughput => solve_offline_throughput(s)?.throughput,
        Metric::RemainingEnergy => solve_offline_energy(s)?.remaining_energy,
        Metric::Delivered => solve_offline_energy(s)?.delivered,
        Metric::Feasible => f64::from(u8::from(check_feasibility(s)?.feasible)),
        Metric::CompletionTime => solve_tct(s)?.t_min,
        Metric::CompletionEnergy => solve_tct(s)?.remaining_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_well_formed() {
        let r = Registry::builtin();
        for c in &r.checks {
            assert!(r.scenarios.contains_key(&c.scenario), "{}", c.name);
            assert!(c.tolerance >= 0.0);
            assert!(["reference", "computed"].contains(&c.origin.as_str()));
        }
        assert!(r.scenario("missing").is_err());
    }

    #[test]
    fn scenarios_validate_for_their_kinds() {
        let r = Registry::builtin();
        let t = r.scenario("reference-throughput").unwrap();
        assert!(gluepour_core::validate_scenario(&t, gluepour_core::ProblemKind::Throughput).is_ok());
        let e = r.scenario("reference-energy").unwrap();
        assert!(gluepour_core::validate_scenario(&e, gluepour_core::ProblemKind::Tct).is_ok());
    }

    #[test]
    fn energy_and_completion_checks_pass() {
        let r = Registry::builtin();
        for o in r.run().iter().filter(|o| !o.name.starts_with("throughput")) {
            assert!(o.passed, "{o:?}");
        }
    }
}
