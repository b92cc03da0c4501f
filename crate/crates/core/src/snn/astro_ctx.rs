//! Astrocytes coupled to the spiking engine.
//!
//! Each astrocyte encloses a group of neurons and the synapses onto them. The
//! coupling is quasi-static: the mean firing rate per enclosed neuron on the healthy
//! model sets the astrocyte's operating point, the faulted model's rate then drives it for
//! `adapt_time`, and the PR reached (relative to a healthy run of the same length)
//! rescales transmission on the enclosed synapses.

use serde::{Deserialize, Serialize};

use super::{Dataset, EngineConfig, ModelGraph, Network};
use crate::astro::{poisson_train, simulate, AstroParams, AstroState, FaultSchedule, SimOptions};
use crate::error::{Error, Result};
use crate::rng;
use crate::synthesis::AstroAllocation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Coupling {
    /// Time the astrocyte adapts to the faulted rate (s).
    pub adapt_time: f64,
    /// Trailing window over which PR is averaged (s).
    pub average_window: f64,
    pub seed: u64,
}

impl Default for Coupling {
    fn default() -> Self {
        Self { adapt_time: 20.0, average_window: 1.0, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Group {
    members: Vec<usize>,
    depth: usize,
    healthy_rate: f64,
    healthy_pr: f64,
}

/// A model family with astrocytes attached, calibrated on the healthy model.
#[derive(Debug, Clone)]
pub struct RepairContext {
    astro: AstroParams,
    engine: EngineConfig,
    coupling: Coupling,
    data: Dataset,
    groups: Vec<Group>,
}

/// Attach one astrocyte per allocated group and calibrate on `healthy`.
pub fn attach_astrocytes(
    healthy: &ModelGraph,
    allocation: &AstroAllocation,
    astro: &AstroParams,
    engine: &EngineConfig,
    coupling: &Coupling,
    data: &Dataset,
) -> Result<RepairContext> {
    let groups: Vec<Vec<usize>> = allocation.groups().cloned().collect();
    RepairContext::new(healthy, &groups, astro, engine, coupling, data)
}

impl RepairContext {
    pub fn new(
        healthy: &ModelGraph,
        groups: &[Vec<usize>],
        astro: &AstroParams,
        engine: &EngineConfig,
        coupling: &Coupling,
        data: &Dataset,
    ) -> Result<Self> {
        astro.validate()?;
        engine.validate()?;
        data.validate()?;
        let n = healthy.neurons.len();
        let mut owner = vec![None; n];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Allocation(format!("group {g} is empty")));
            }
            for &m in members {
                if m >= n {
                    return Err(Error::Allocation(format!("group {g} references missing neuron {m}")));
                }
                if let Some(other) = owner[m] {
                    return Err(Error::Allocation(format!("neuron {m} is enclosed by groups {other} and {g}")));
                }
                owner[m] = Some(g);
            }
        }
        let mut ctx = Self {
            astro: astro.clone(),
            engine: engine.clone(),
            coupling: coupling.clone(),
            data: data.clone(),
            groups: groups
                .iter()
                .map(|m| Group {
                    members: m.clone(),
                    depth: m.iter().map(|&i| healthy.neurons[i].layer).max().unwrap_or(0),
                    healthy_rate: 0.0,
                    healthy_pr: 0.0,
                })
                .collect(),
        };
        if ctx.groups.is_empty() {
            return Ok(ctx);
        }
        let net = Network::new(healthy)?;
        let (_, counts) = net.evaluate(&ctx.data, &net.uniform_transmit(engine.pr0), engine, coupling.seed)?;
        for g in 0..ctx.groups.len() {
            let rate = ctx.member_rate(&ctx.groups[g].members, &counts);
            let pr = ctx.adapted_pr(rate, rate, g)?;
            ctx.groups[g].healthy_rate = rate;
            ctx.groups[g].healthy_pr = pr;
        }
        Ok(ctx)
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Mean rate per member, which is what each member's tripartite synapse feeds in.
    fn member_rate(&self, members: &[usize], counts: &[u64]) -> f64 {
        let spikes: u64 = members.iter().map(|&m| counts[m]).sum();
        spikes as f64 / (members.len() as f64 * self.data.samples.len() as f64 * self.engine.duration)
    }

    fn adapted_pr(&self, healthy_rate: f64, rate: f64, group: usize) -> Result<f64> {
        let c = &self.coupling;
        let seed = rng::derive(c.seed, 1000 + group as u64);
        let train = poisson_train(rate, c.adapt_time, seed)?;
        let mut opts = SimOptions::new(c.adapt_time, 1, seed);
        opts.initial = Some(AstroState::equilibrium(&self.astro, healthy_rate));
        let trace = simulate(&self.astro, &[train], &FaultSchedule::none(), &opts)?;
        Ok(trace.mean_pr(c.adapt_time - c.average_window, c.adapt_time))
    }

    /// Per-neuron transmission probabilities for `model` after adaptation.
    pub fn transmit_for(&self, model: &ModelGraph) -> Result<Vec<f64>> {
        let net = Network::new(model)?;
        let pr0 = self.engine.pr0;
        let mut transmit = net.uniform_transmit(pr0);
        let mut depths: Vec<usize> = self.groups.iter().map(|g| g.depth).collect();
        depths.sort_unstable();
        depths.dedup();
        // Upstream groups settle first since they shape the rates seen downstream.
        for d in depths {
            let (_, counts) = net.evaluate(&self.data, &transmit, &self.engine, self.coupling.seed)?;
            for (gi, g) in self.groups.iter().enumerate().filter(|(_, g)| g.depth == d) {
                if g.healthy_rate <= 0.0 || !(g.healthy_pr > 0.0) {
                    continue;
                }
                let rate = self.member_rate(&g.members, &counts);
                let pr = self.adapted_pr(g.healthy_rate, rate, gi)?;
                let p = (pr0 * pr / g.healthy_pr).clamp(0.0, 1.0);
                for &m in &g.members {
                    transmit[m] = p;
                }
            }
        }
        Ok(transmit)
    }

    pub fn accuracy(&self, model: &ModelGraph, data: &Dataset, seeds: &[u64]) -> Result<f64> {
        let transmit = self.transmit_for(model)?;
        Network::new(model)?.accuracy_with(data, &transmit, &self.engine, seeds)
    }

    /// Mean firing rate (Hz) of the members of `group`.
    pub fn group_output_rate(&self, model: &ModelGraph, group: usize, seed: u64, repaired: bool) -> Result<f64> {
        let net = Network::new(model)?;
        let transmit = if repaired { self.transmit_for(model)? } else { net.uniform_transmit(self.engine.pr0) };
        let (_, counts) = net.evaluate(&self.data, &transmit, &self.engine, seed)?;
        Ok(self.member_rate(&self.groups[group].members, &counts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{accuracy, apply_fault, build_toy_model, FaultKind, Param, ToySpec};

    fn toy() -> crate::snn::ToyModel {
        build_toy_model(&ToySpec { layers: vec![4, 12, 3], eval_per_class: 20, ..Default::default() }).unwrap()
    }

    #[test]
    fn empty_allocation_matches_plain_inference() {
        let t = toy();
        let cfg = EngineConfig::default();
        let ctx = RepairContext::new(&t.model, &[], &AstroParams::default(), &cfg, &Coupling::default(), &t.eval).unwrap();
        let seeds = [3, 4];
        assert_eq!(ctx.accuracy(&t.model, &t.eval, &seeds).unwrap(), accuracy(&t.model, &t.eval, &cfg, &seeds).unwrap());
    }

    #[test]
    fn healthy_model_keeps_its_accuracy() {
        let t = toy();
        let cfg = EngineConfig::default();
        let hidden = t.model.layer_members(1);
        let ctx = RepairContext::new(&t.model, &[hidden], &AstroParams::default(), &cfg, &Coupling::default(), &t.eval).unwrap();
        let seeds: Vec<u64> = (0..4).collect();
        let with = ctx.accuracy(&t.model, &t.eval, &seeds).unwrap();
        let without = accuracy(&t.model, &t.eval, &cfg, &seeds).unwrap();
        assert!((with - without).abs() <= 0.02);
    }

    #[test]
    fn stuck_member_is_compensated() {
        let t = toy();
        let cfg = EngineConfig::default();
        let hidden = t.model.layer_members(1);
        let ctx = RepairContext::new(&t.model, std::slice::from_ref(&hidden), &AstroParams::default(), &cfg, &Coupling::default(), &t.eval).unwrap();
        let net = Network::new(&t.model).unwrap();
        let (_, counts) = net.evaluate(&t.eval, &net.uniform_transmit(cfg.pr0), &cfg, 1).unwrap();
        let busiest = *hidden.iter().max_by_key(|&&m| counts[m]).unwrap();
        let mut faulted = t.model.clone();
        apply_fault(&mut faulted, Param::Neuron(busiest), FaultKind::NeuronStuckOff, 0).unwrap();
        let repaired = ctx.group_output_rate(&faulted, 0, 7, true).unwrap();
        let unrepaired = ctx.group_output_rate(&faulted, 0, 7, false).unwrap();
        assert!(repaired > unrepaired, "{repaired} <= {unrepaired}");
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let t = toy();
        let r = RepairContext::new(
            &t.model,
            &[vec![5, 6], vec![6, 7]],
            &AstroParams::default(),
            &EngineConfig::default(),
            &Coupling::default(),
            &t.eval,
        );
        assert!(matches!(r, Err(Error::Allocation(_))));
    }
}
