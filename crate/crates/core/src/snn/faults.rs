use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ModelGraph;
use crate::error::{param, Result};
use crate::rng::{self, uniform_at};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// One bit of the 2-bit weight code flips.
    WeightBitFlip,
    NeuronStuckOff,
    SynapseStuckZero,
}

impl FaultKind {
    pub const ALL: [FaultKind; 3] = [FaultKind::WeightBitFlip, FaultKind::NeuronStuckOff, FaultKind::SynapseStuckZero];

    pub fn targets_edges(self) -> bool {
        !matches!(self, FaultKind::NeuronStuckOff)
    }
}

/// A faultable model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    Edge(usize),
    Neuron(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub error_rate: f64,
    pub kinds: Vec<FaultKind>,
    pub seed: u64,
}

impl FaultSpec {
    pub fn new(error_rate: f64, kinds: &[FaultKind], seed: u64) -> Self {
        Self { error_rate, kinds: kinds.to_vec(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(param("error_rate", format!("must lie in [0, 1], got {}", self.error_rate)));
        }
        if self.kinds.is_empty() {
            return Err(param("kinds", "at least one fault kind required"));
        }
        Ok(())
    }
}

/// Parameters any of `kinds` can hit: edges first, then neurons.
pub fn parameter_universe(model: &ModelGraph, kinds: &[FaultKind]) -> Vec<Param> {
    let mut out = Vec::new();
    if kinds.iter().any(|k| k.targets_edges()) {
        out.extend((0..model.edges.len()).map(Param::Edge));
    }
    if kinds.contains(&FaultKind::NeuronStuckOff) {
        out.extend((0..model.neurons.len()).map(Param::Neuron));
    }
    out
}

/// `⌊rate·count⌋`, tolerant of rates like 0.29 that are not exact in binary.
pub fn fault_count(rate: f64, count: usize) -> usize {
    ((rate * count as f64 + 1e-9).floor() as usize).min(count)
}

/// Apply one fault. `bit` picks which code bit a flip hits.
pub fn apply_fault(model: &mut ModelGraph, target: Param, kind: FaultKind, bit: u8) -> Result<()> {
    match (target, kind) {
        (Param::Neuron(i), FaultKind::NeuronStuckOff) => {
            let n = model.neurons.get_mut(i).ok_or_else(|| param("neuron", format!("{i} out of range")))?;
            n.fault = Some(kind);
        }
        (Param::Edge(i), FaultKind::SynapseStuckZero) => {
            let e = model.edges.get_mut(i).ok_or_else(|| param("edge", format!("{i} out of range")))?;
            e.code = 0;
            e.fault = Some(kind);
        }
        (Param::Edge(i), FaultKind::WeightBitFlip) => {
            let e = model.edges.get_mut(i).ok_or_else(|| param("edge", format!("{i} out of range")))?;
            e.code = flip_bit(e.code, bit & 1);
            e.fault = Some(kind);
        }
        _ => return Err(param("kind", format!("{kind:?} does not apply to {target:?}"))),
    }
    Ok(())
}

/// Flip one bit of a code held as 2-bit two's complement.
fn flip_bit(code: i8, bit: u8) -> i8 {
    let bits = (code as u8 & 0b11) ^ (1 << bit);
    if bits >= 2 {
        bits as i8 - 4
    } else {
        bits as i8
    }
}

/// Fault `⌊error_rate·P⌋` distinct parameters. The chosen set is a prefix of one
/// seeded permutation, so a higher rate faults a superset of a lower one.
pub fn inject_faults(model: &ModelGraph, spec: &FaultSpec) -> Result<ModelGraph> {
    spec.validate()?;
    let mut universe = parameter_universe(model, &spec.kinds);
    let count = fault_count(spec.error_rate, universe.len());
    universe.shuffle(&mut rng::seeded(spec.seed));
    let mut edge_kinds: Vec<FaultKind> = spec.kinds.iter().copied().filter(|k| k.targets_edges()).collect();
    edge_kinds.sort();
    edge_kinds.dedup();
    let key = rng::derive(spec.seed, 3);
    let mut out = model.clone();
    for &p in &universe[..count] {
        let id = match p {
            Param::Edge(i) => i as u64,
            Param::Neuron(i) => (1 << 40) + i as u64,
        };
        let kind = match p {
            Param::Neuron(_) => FaultKind::NeuronStuckOff,
            Param::Edge(_) => {
                let u = uniform_at(key, id, 0, 0);
                edge_kinds[((u * edge_kinds.len() as f64) as usize).min(edge_kinds.len() - 1)]
            }
        };
        let bit = u8::from(uniform_at(key, id, 1, 0) < 0.5);
        apply_fault(&mut out, p, kind, bit)?;
    }
    Ok(out)
}
