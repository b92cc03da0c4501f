//! Desk-scale spiking inference: LIF neurons, Poisson rate coding and 2-bit weights.

mod astro_ctx;
mod engine;
mod faults;
mod toy;

pub use astro_ctx::{attach_astrocytes, Coupling, RepairContext};
pub use engine::{accuracy, infer, EngineConfig, InferenceRun, Network};
pub use faults::{apply_fault, fault_count, inject_faults, parameter_universe, FaultKind, FaultSpec, Param};
pub use toy::{build_toy_model, ToyModel, ToySpec};

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifParams {
    pub v_threshold: f64,
    /// Membrane time constant (s).
    pub leak_tau: f64,
    pub v_reset: f64,
    /// Refractory period (s).
    pub refractory: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self { v_threshold: 1.0, leak_tau: 0.02, v_reset: 0.0, refractory: 0.002 }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_threshold > self.v_reset) {
            return Err(param("v_threshold", "must exceed v_reset"));
        }
        if !(self.leak_tau > 0.0) {
            return Err(param("leak_tau", "must be > 0"));
        }
        if !(self.refractory >= 0.0) {
            return Err(param("refractory", "must be >= 0"));
        }
        Ok(())
    }

    /// Firing rate (Hz) of a noise-free neuron under constant drive `mu` (potential/s).
    pub fn rate(&self, mu: f64) -> f64 {
        let v_inf = self.v_reset + mu * self.leak_tau;
        if v_inf <= self.v_threshold || mu <= 0.0 {
            return 0.0;
        }
        let isi = self.leak_tau * ((v_inf - self.v_reset) / (v_inf - self.v_threshold)).ln();
        1.0 / (self.refractory + isi)
    }
}

/// The signed 2-bit levels a weight code may take.
pub const WEIGHT_CODES: [i8; 4] = [-2, -1, 0, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neuron {
    pub layer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub pre: usize,
    pub post: usize,
    pub code: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultKind>,
}

/// Feed-forward spiking model. Layer 0 holds the inputs; the weight of an edge is
/// its code times the scale of its post-synaptic neuron's layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelGraph {
    pub lif: LifParams,
    pub layer_scales: Vec<f64>,
    pub neurons: Vec<Neuron>,
    pub edges: Vec<Edge>,
    /// Output neurons; class `k` is the `k`-th smallest id.
    pub outputs: Vec<usize>,
}

impl ModelGraph {
    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        let n = self.neurons.len();
        if n == 0 {
            return Err(param("neurons", "model has no neurons"));
        }
        let layers = self.layer_count();
        if self.layer_scales.len() < layers {
            return Err(param("layer_scales", format!("need {layers} scales")));
        }
        if self.layer_scales.iter().any(|s| !s.is_finite()) {
            return Err(param("layer_scales", "must be finite"));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.pre >= n || e.post >= n {
                return Err(param("edges", format!("edge {i} references a missing neuron")));
            }
            if self.neurons[e.pre].layer >= self.neurons[e.post].layer {
                return Err(param("edges", format!("edge {i} is not feed-forward")));
            }
            if !WEIGHT_CODES.contains(&e.code) {
                return Err(param("edges", format!("edge {i} has code {} outside the 2-bit levels", e.code)));
            }
        }
        if self.outputs.is_empty() {
            return Err(param("outputs", "no output neurons"));
        }
        if self.outputs.windows(2).any(|w| w[0] >= w[1]) || self.outputs.iter().any(|&o| o >= n) {
            return Err(param("outputs", "must be strictly increasing neuron ids"));
        }
        let unreached = self.unreachable();
        if !unreached.is_empty() {
            return Err(Error::Unreachable(unreached));
        }
        Ok(())
    }

    /// Neurons with no path to any output.
    pub fn unreachable(&self) -> Vec<usize> {
        let n = self.neurons.len();
        let mut seen = vec![false; n];
        let mut pre_of: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            if e.pre < n && e.post < n {
                pre_of[e.post].push(e.pre);
            }
        }
        let mut q: VecDeque<usize> = self.outputs.iter().copied().filter(|&o| o < n).collect();
        for &o in &q {
            seen[o] = true;
        }
        while let Some(v) = q.pop_front() {
            for &u in &pre_of[v] {
                if !seen[u] {
                    seen[u] = true;
                    q.push_back(u);
                }
            }
        }
        (0..n).filter(|&i| !seen[i]).collect()
    }

    pub fn layer_count(&self) -> usize {
        self.neurons.iter().map(|n| n.layer + 1).max().unwrap_or(0)
    }

    /// Input neuron ids in ascending order.
    pub fn inputs(&self) -> Vec<usize> {
        self.layer_members(0)
    }

    pub fn layer_members(&self, layer: usize) -> Vec<usize> {
        (0..self.neurons.len()).filter(|&i| self.neurons[i].layer == layer).collect()
    }

    pub fn weight(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        f64::from(e.code) * self.layer_scales[self.neurons[e.post].layer]
    }

    pub fn classes(&self) -> usize {
        self.outputs.len()
    }

    pub fn faulted_count(&self) -> usize {
        self.neurons.iter().filter(|n| n.fault.is_some()).count()
            + self.edges.iter().filter(|e| e.fault.is_some()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    /// Poisson rate (Hz) per input neuron, in input-id order.
    pub rates: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(param("samples", "dataset is empty"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.label >= self.classes {
                return Err(param("samples", format!("sample {i} label {} >= {}", s.label, self.classes)));
            }
            if s.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(param("samples", format!("sample {i} has a negative or non-finite rate")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }
}
