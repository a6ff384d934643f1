//! Experiment configuration file.
//!
//! One JSON object with sections `model`, `sim`, `interval`, `garbling`,
//! `cost`, `solve` and `sweep`. Each command reads only the sections it
//! needs.

use std::path::Path;

use persuade_core::costs::{CostModel, CostSpec};
use persuade_core::dynamics::SimConfig;
use persuade_core::solver::SolveConfig;
use persuade_core::{GarblingPolicy, ModelParams};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Belief interval for `simulate`; `upper` defaults to the approval threshold.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSection {
    pub lower: f64,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub grid_n: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub kappas: Option<Vec<f64>>,
}

const SECTIONS: [&str; 7] = ["model", "sim", "interval", "garbling", "cost", "solve", "sweep"];

pub struct Config {
    sections: Map<String, Value>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::config(format!("malformed JSON: {e}")))?;
        let Value::Object(sections) = value else {
            return Err(CliError::config("config must be a JSON object"));
        };
        if let Some(unknown) = sections.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(CliError::config(format!("unknown section '{unknown}'")));
        }
        Ok(Self { sections })
    }

    fn section<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, CliError> {
        self.sections
            .get(name)
            .map(|v| {
                serde_json::from_value(v.clone()).map_err(|e| CliError::config(format!("section '{name}': {e}")))
            })
            .transpose()
    }

    fn required<T: DeserializeOwned>(&self, name: &str) -> Result<T, CliError> {
        self.section(name)?.ok_or_else(|| CliError::config(format!("missing section '{name}'")))
    }

    pub fn model(&self) -> Result<ModelParams, CliError> {
        self.required("model")
    }

    pub fn sim(&self, seed_override: Option<u64>) -> Result<SimConfig, CliError> {
        let sim: SimConfig = self.required("sim")?;
        finish_sim(sim, seed_override)
    }

    /// Simulation settings for Monte Carlo cost terms; a default when absent.
    pub fn sim_or_default(&self, seed_override: Option<u64>) -> Result<SimConfig, CliError> {
        let sim = self.section::<SimConfig>("sim")?.unwrap_or_else(|| SolveConfig::default().sim);
        finish_sim(sim, seed_override)
    }

    pub fn interval(&self, model: &ModelParams) -> Result<(f64, f64), CliError> {
        let i: IntervalSection = self.required("interval")?;
        Ok((i.lower, i.upper.unwrap_or(model.p_bar())))
    }

    pub fn garbling(&self) -> Result<GarblingPolicy, CliError> {
        Ok(self.section("garbling")?.unwrap_or_default())
    }

    /// A cost section that is well-formed JSON but not increasing and convex
    /// is a cost-model failure, not a config failure.
    pub fn cost(&self) -> Result<CostModel, CliError> {
        let spec: CostSpec = self.required("cost")?;
        CostModel::new(spec).map_err(|e| CliError::cost(e.to_string()))
    }

    pub fn solve(&self, seed_override: Option<u64>) -> Result<SolveConfig, CliError> {
        let grid_n = self.section::<SolveSection>("solve")?.map_or(SolveConfig::default().grid_n, |s| s.grid_n);
        Ok(SolveConfig { grid_n, sim: self.sim_or_default(seed_override)? })
    }

    pub fn sweep(&self) -> Result<SweepSection, CliError> {
        self.required("sweep")
    }
}

fn finish_sim(mut sim: SimConfig, seed_override: Option<u64>) -> Result<SimConfig, CliError> {
    if let Some(seed) = seed_override {
        sim.seed = seed;
    }
    sim.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(sim)
}
