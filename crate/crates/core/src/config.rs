//! Experiment configuration. Every section is optional and falls back to the
//! published parameter sets; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::astro::{AstroParams, SiteNeuron};
use crate::costmodel::{AreaModel, PowerModel};
use crate::error::{Error, Result};
use crate::fixed::Placement;
use crate::netmap::CoreSpec;
use crate::reliability::ReliabilityParams;
use crate::snn::{Coupling, FaultKind, ToySpec};
use crate::synthesis::{Preset, SynthesisConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cores {
    pub ubrain: CoreSpec,
    pub crossbar: CoreSpec,
}

impl Default for Cores {
    fn default() -> Self {
        Self { ubrain: CoreSpec::default_ubrain(), crossbar: CoreSpec::default_crossbar() }
    }
}

/// The error-recovery scenario: `sources` Poisson inputs, source 0 cut at `fault_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfRepairConfig {
    pub duration: f64,
    pub fault_time: f64,
    pub rate_hz: f64,
    pub sources: usize,
    pub seeds: u64,
    /// Integration steps per trace row.
    pub sample_every: usize,
    pub site: SiteNeuron,
}

impl Default for SelfRepairConfig {
    fn default() -> Self {
        Self { duration: 100.0, fault_time: 50.0, rate_hz: 60.0, sources: 2, seeds: 10, sample_every: 100, site: SiteNeuron::default() }
    }
}

impl SelfRepairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.fault_time > 0.0 && self.fault_time < self.duration) {
            return Err(field("selfrepair.fault_time", "need 0 < fault_time < duration"));
        }
        if !(self.rate_hz > 0.0) {
            return Err(field("selfrepair.rate_hz", "must be > 0"));
        }
        if self.sources < 2 {
            return Err(field("selfrepair.sources", "need at least two sources"));
        }
        if self.seeds == 0 || self.sample_every == 0 {
            return Err(field("selfrepair.seeds", "seeds and sample_every must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSweepConfig {
    pub rates: Vec<f64>,
    pub seeds: u64,
    pub kinds: Vec<FaultKind>,
    pub preset: Preset,
    pub n_r: usize,
}

impl Default for FaultSweepConfig {
    fn default() -> Self {
        Self {
            rates: vec![0.1, 0.2, 0.5],
            seeds: 10,
            kinds: vec![FaultKind::WeightBitFlip, FaultKind::SynapseStuckZero],
            preset: Preset::CoDesign,
            n_r: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PwlConfig {
    pub segments: Vec<usize>,
    pub placement: Placement,
    pub seeds: u64,
}

impl Default for PwlConfig {
    fn default() -> Self {
        Self { segments: vec![16, 32, 64], placement: Placement::Equidistributed, seeds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityReportConfig {
    pub interval_hours: f64,
    pub max_n: u32,
}

impl Default for ReliabilityReportConfig {
    fn default() -> Self {
        Self { interval_hours: 24.0, max_n: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub model: PowerModel,
    /// Active-synapse fraction applied to every cluster.
    pub activity: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { model: PowerModel::default(), activity: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub astro: AstroParams,
    pub reliability: ReliabilityParams,
    pub reliability_report: ReliabilityReportConfig,
    pub cores: Cores,
    pub synthesis: SynthesisConfig,
    pub area: AreaModel,
    pub power: PowerConfig,
    pub toy: ToySpec,
    pub coupling: Coupling,
    pub selfrepair: SelfRepairConfig,
    pub faults: FaultSweepConfig,
    pub pwl: PwlConfig,
}

fn field(name: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: name.to_string(), reason: reason.into() }
}

/// Re-tag a module validation error with its config section.
fn section<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parameter { name: p, reason } => field(&format!("{name}.{p}"), reason),
        other => field(name, other.to_string()),
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| field("<json>", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| field("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        section("astro", self.astro.validate())?;
        section("reliability.bti", self.reliability.bti.validate())?;
        section("reliability.endurance", self.reliability.endurance.validate())?;
        section("reliability", self.reliability.rates().map(|_| ()))?;
        if !(self.reliability_report.interval_hours >= 0.0) {
            return Err(field("reliability_report.interval_hours", "must be >= 0"));
        }
        section("cores.ubrain", self.cores.ubrain.validate())?;
        section("cores.crossbar", self.cores.crossbar.validate())?;
        section("synthesis", self.synthesis.validate())?;
        section("area", self.area.validate())?;
        section("power.model", self.power.model.validate())?;
        if !(0.0..=1.0).contains(&self.power.activity) {
            return Err(field("power.activity", "must lie in [0, 1]"));
        }
        section("toy.lif", self.toy.lif.validate())?;
        section("toy.engine", self.toy.engine.validate())?;
        if !(self.coupling.adapt_time > 0.0 && self.coupling.average_window > 0.0 && self.coupling.average_window <= self.coupling.adapt_time) {
            return Err(field("coupling.average_window", "need 0 < average_window <= adapt_time"));
        }
        self.selfrepair.validate()?;
        let f = &self.faults;
        if f.rates.is_empty() || f.rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(field("faults.rates", "need at least one rate in [0, 1]"));
        }
        if f.seeds == 0 || f.n_r == 0 || f.kinds.is_empty() {
            return Err(field("faults", "seeds, n_r and kinds must be non-empty"));
        }
        if self.pwl.segments.is_empty() || self.pwl.segments.contains(&0) || self.pwl.seeds == 0 {
            return Err(field("pwl.segments", "need segment counts >= 1 and seeds >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"astro": {"tau_x": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"nonsense": true}"#).is_err());
    }

    #[test]
    fn diagnostics_name_the_field() {
        let e = ExperimentConfig::from_json(r#"{"astro": {"tau_ag": -1}}"#).unwrap_err();
        assert!(e.to_string().contains("astro.tau_ag"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"faults": {"rates": [1.5]}}"#).unwrap_err();
        assert!(e.to_string().contains("faults.rates"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"synthesis": {"n_r": 0}}"#).unwrap_err();
        assert!(e.to_string().contains("synthesis.n_r"), "{e}");
    }
}
