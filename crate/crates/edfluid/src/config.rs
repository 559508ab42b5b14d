//! JSON run configuration.
//!
//! ```json
//! {
//!   "lambda": 1.0, "mu": 0.5, "N_list": [50, 200, 800], "horizon": 5.0, "seed": 1,
//!   "patience_law": {"kind": "exponential", "rate": 2.0},
//!   "initial_measure": {"mass": 1.0, "law": {"kind": "exponential", "rate": 1.0}}
//! }
//! ```
//!
//! `arrival_law` and `service_law` default to exponential and only fix the
//! shape: they are rescaled to means `1/(Nλ)` and `1/(Nμ)`. Unknown keys are
//! rejected. Overrides `key=value` (dotted keys reach into nested objects)
//! are applied to the parsed JSON before validation; values are read as JSON
//! and fall back to plain strings.

use std::fs;
use std::path::Path;

use edfluid_core::distribution::DistributionSpec;
use edfluid_core::fluid::{FluidProblem, DEFAULT_STEPS};
use edfluid_core::model::{InitialCondition, SystemParams};
use edfluid_core::sim::{RunConfig, DEFAULT_EVENT_CAP, DEFAULT_OUTPUT_POINTS, DEFAULT_SNAPSHOTS};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Weibull { shape: f64, scale: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    Deterministic { value: f64 },
    EmpiricalGrid { points: Vec<f64>, cdf: Vec<f64> },
}

impl LawConfig {
    pub fn to_spec(&self) -> edfluid_core::Result<DistributionSpec> {
        match self {
            LawConfig::Exponential { rate } => DistributionSpec::exponential(*rate),
            LawConfig::Uniform { lo, hi } => DistributionSpec::uniform(*lo, *hi),
            LawConfig::Weibull { shape, scale } => DistributionSpec::weibull(*shape, *scale),
            LawConfig::HyperExponential { weights, rates } => {
                DistributionSpec::hyper_exponential(weights.clone(), rates.clone())
            }
            LawConfig::Deterministic { value } => DistributionSpec::deterministic(*value),
            LawConfig::EmpiricalGrid { points, cdf } => DistributionSpec::empirical_grid(points.clone(), cdf.clone()),
        }
    }
}

fn unit_exponential() -> LawConfig {
    LawConfig::Exponential { rate: 1.0 }
}

fn default_output_points() -> usize {
    DEFAULT_OUTPUT_POINTS
}

fn default_snapshots() -> usize {
    DEFAULT_SNAPSHOTS
}

fn default_fluid_steps() -> usize {
    DEFAULT_STEPS
}

fn default_event_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialMeasureConfig {
    pub mass: f64,
    pub law: LawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub lambda: f64,
    pub mu: f64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<u64>,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "unit_exponential")]
    pub arrival_law: LawConfig,
    #[serde(default = "unit_exponential")]
    pub service_law: LawConfig,
    pub patience_law: LawConfig,
    pub initial_measure: InitialMeasureConfig,
    #[serde(default)]
    pub frontier0: f64,
    #[serde(default = "default_output_points")]
    pub output_points: usize,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_fluid_steps")]
    pub fluid_steps: usize,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
    #[serde(default = "yes")]
    pub frontier_on_bypass: bool,
}

impl Config {
    pub fn from_value(value: Value) -> Result<Self, AppError> {
        let cfg: Config = serde_json::from_value(value).map_err(|e| AppError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, AppError> {
        let mut value = read_json(path)?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.n_list.is_empty() {
            return Err(AppError::Config("N_list must not be empty".into()));
        }
        if self.n_list.contains(&0) {
            return Err(AppError::Config("N_list entries must be >= 1".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AppError::Config("N_list must be strictly increasing".into()));
        }
        self.system_params(self.n_list[0], self.seed)?;
        self.initial_condition()?;
        self.arrival_law.to_spec()?;
        self.service_law.to_spec()?;
        self.patience_law.to_spec()?;
        if self.fluid_steps < 2 {
            return Err(AppError::Config("fluid_steps must be >= 2".into()));
        }
        Ok(())
    }

    pub fn system_params(&self, n: u64, seed: u64) -> Result<SystemParams, AppError> {
        Ok(SystemParams::new(self.lambda, self.mu, n, self.horizon, seed)?)
    }

    pub fn initial_condition(&self) -> Result<InitialCondition, AppError> {
        let law = self.initial_measure.law.to_spec()?;
        Ok(InitialCondition::new(self.initial_measure.mass, law, self.frontier0)?)
    }

    pub fn patience(&self) -> Result<DistributionSpec, AppError> {
        Ok(self.patience_law.to_spec()?)
    }

    pub fn fluid_problem(&self, steps: Option<usize>) -> Result<FluidProblem, AppError> {
        Ok(FluidProblem::new(
            self.lambda,
            self.mu,
            self.patience()?,
            self.initial_condition()?,
            self.horizon,
            steps.unwrap_or(self.fluid_steps),
        )?)
    }

    pub fn run_config(&self, n: u64) -> Result<RunConfig, AppError> {
        let mut rc = RunConfig::uniform(self.horizon, n as f64, self.output_points, self.snapshots)?;
        rc.event_cap = self.event_cap;
        rc.frontier_on_bypass = self.frontier_on_bypass;
        Ok(rc)
    }
}

pub fn read_json(path: &Path) -> Result<Value, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(value: &mut Value, overrides: &[String]) -> Result<(), AppError> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("override `{item}` is not of the form key=value")))?;
        let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut target = &mut *value;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = target
                .as_object_mut()
                .ok_or_else(|| AppError::Config(format!("override `{key}`: `{part}` is not inside an object")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), parsed.clone());
                break;
            }
            target = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "lambda": 1.0, "mu": 0.5, "N_list": [50, 200, 800], "horizon": 5.0, "seed": 7,
            "patience_law": {"kind": "exponential", "rate": 2.0},
            "initial_measure": {"mass": 1.0, "law": {"kind": "exponential", "rate": 1.0}}
        })
    }

    #[test]
    fn defaults_are_filled_in() {
        let c = Config::from_value(base()).unwrap();
        assert_eq!(c.arrival_law, LawConfig::Exponential { rate: 1.0 });
        assert_eq!(c.service_law, LawConfig::Exponential { rate: 1.0 });
        assert_eq!(c.frontier0, 0.0);
        assert_eq!(c.output_points, DEFAULT_OUTPUT_POINTS);
        assert!(c.frontier_on_bypass);
    }

    #[test]
    fn missing_patience_is_named() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("patience_law");
        let err = Config::from_value(v).unwrap_err().to_string();
        assert!(err.contains("patience_law"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = base();
        v["lamda"] = json!(1.0);
        assert!(Config::from_value(v).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut v = base();
        apply_overrides(
            &mut v,
            &["mu=0.9".into(), "initial_measure.mass=2".into(), "patience_law={\"kind\":\"uniform\",\"lo\":0,\"hi\":2}".into()],
        )
        .unwrap();
        let c = Config::from_value(v).unwrap();
        assert_eq!(c.mu, 0.9);
        assert_eq!(c.initial_measure.mass, 2.0);
        assert_eq!(c.patience_law, LawConfig::Uniform { lo: 0.0, hi: 2.0 });
        assert!(apply_overrides(&mut base(), &["novalue".into()]).is_err());
    }

    #[test]
    fn n_list_must_increase() {
        let mut v = base();
        v["N_list"] = json!([200, 50]);
        assert!(Config::from_value(v).is_err());
    }

    #[test]
    fn bad_law_parameters_are_config_errors() {
        let mut v = base();
        v["patience_law"] = json!({"kind": "weibull", "shape": -1.0, "scale": 1.0});
        assert!(matches!(Config::from_value(v), Err(AppError::Model(_))));
    }

    #[test]
    fn round_trips_through_json() {
        let c = Config::from_value(base()).unwrap();
        assert_eq!(Config::from_value(c.to_value()).unwrap(), c);
    }
}
