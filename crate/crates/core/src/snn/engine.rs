use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, FaultKind, ModelGraph, Sample};
use crate::error::{param, Result};
use crate::rng::{derive, uniform_at};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Simulated inference window per sample (s).
    pub duration: f64,
    pub dt: f64,
    /// Transmission probability of a synapse without an astrocyte.
    pub pr0: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { duration: 0.5, dt: 1e-3, pr0: 0.5 }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.duration >= self.dt) {
            return Err(param("duration/dt", "need dt > 0 and duration >= dt"));
        }
        if !(0.0..=1.0).contains(&self.pr0) {
            return Err(param("pr0", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Copy)]
struct OutEdge {
    post: u32,
    weight: f64,
    index: u64,
}

/// A model flattened for repeated simulation.
#[derive(Debug, Clone)]
pub struct Network {
    order: Vec<usize>,
    input_slot: Vec<Option<usize>>,
    disabled: Vec<bool>,
    out_start: Vec<usize>,
    out_edges: Vec<OutEdge>,
    outputs: Vec<usize>,
    n_inputs: usize,
    v_threshold: f64,
    v_reset: f64,
    leak_tau: f64,
    refractory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRun {
    /// Spike count per neuron.
    pub counts: Vec<u32>,
    pub prediction: usize,
}

impl Network {
    pub fn new(model: &ModelGraph) -> Result<Self> {
        model.validate()?;
        let n = model.neurons.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (model.neurons[i].layer, i));
        let inputs = model.inputs();
        let mut input_slot = vec![None; n];
        for (k, &i) in inputs.iter().enumerate() {
            input_slot[i] = Some(k);
        }
        let mut per_pre: Vec<Vec<OutEdge>> = vec![Vec::new(); n];
        for (idx, e) in model.edges.iter().enumerate() {
            let weight = model.weight(idx);
            if weight != 0.0 {
                per_pre[e.pre].push(OutEdge { post: e.post as u32, weight, index: idx as u64 });
            }
        }
        let mut out_start = Vec::with_capacity(n + 1);
        let mut out_edges = Vec::with_capacity(model.edges.len());
        for list in per_pre {
            out_start.push(out_edges.len());
            out_edges.extend(list);
        }
        out_start.push(out_edges.len());
        Ok(Self {
            order,
            input_slot,
            disabled: model.neurons.iter().map(|x| x.fault == Some(FaultKind::NeuronStuckOff)).collect(),
            out_start,
            out_edges,
            outputs: model.outputs.clone(),
            n_inputs: inputs.len(),
            v_threshold: model.lif.v_threshold,
            v_reset: model.lif.v_reset,
            leak_tau: model.lif.leak_tau,
            refractory: model.lif.refractory,
        })
    }

    pub fn neuron_count(&self) -> usize {
        self.order.len()
    }

    /// Simulate one sample. `transmit[i]` is the probability that a spike crosses a
    /// synapse onto neuron `i`.
    pub fn run(
        &self,
        sample: &Sample,
        transmit: &[f64],
        cfg: &EngineConfig,
        seed: u64,
        sample_index: u64,
    ) -> Result<InferenceRun> {
        if sample.rates.len() != self.n_inputs {
            return Err(param(
                "rates",
                format!("sample has {} rates for {} inputs", sample.rates.len(), self.n_inputs),
            ));
        }
        let n = self.order.len();
        if transmit.len() != n {
            return Err(param("transmit", "one probability per neuron required"));
        }
        let input_key = derive(seed, 1);
        let edge_key = derive(seed, 2);
        let decay = cfg.dt / self.leak_tau;
        let refractory_steps = (self.refractory / cfg.dt).round() as u32;
        let p_in: Vec<f64> = sample.rates.iter().map(|r| r * cfg.dt).collect();
        let mut v = vec![self.v_reset; n];
        let mut refr = vec![0u32; n];
        let mut inbox = vec![0.0f64; n];
        let mut counts = vec![0u32; n];
        for step in 0..cfg.steps() {
            for &i in &self.order {
                let drive = std::mem::take(&mut inbox[i]);
                if self.disabled[i] {
                    continue;
                }
                let spiked = if let Some(k) = self.input_slot[i] {
                    uniform_at(input_key, sample_index, step, i as u64) < p_in[k]
                } else if refr[i] > 0 {
                    refr[i] -= 1;
                    false
                } else {
                    v[i] += (self.v_reset - v[i]) * decay + drive;
                    if v[i] >= self.v_threshold {
                        v[i] = self.v_reset;
                        refr[i] = refractory_steps;
                        true
                    } else {
                        false
                    }
                };
                if spiked {
                    counts[i] += 1;
                    for e in &self.out_edges[self.out_start[i]..self.out_start[i + 1]] {
                        if uniform_at(edge_key, sample_index, step, e.index) < transmit[e.post as usize] {
                            inbox[e.post as usize] += e.weight;
                        }
                    }
                }
            }
        }
        let prediction = self.predict(&counts);
        Ok(InferenceRun { counts, prediction })
    }

    /// Argmax of output counts; ties go to the lowest id.
    pub fn predict(&self, counts: &[u32]) -> usize {
        let mut best = 0;
        for (k, &o) in self.outputs.iter().enumerate() {
            if counts[o] > counts[self.outputs[best]] {
                best = k;
            }
        }
        best
    }

    /// Correct predictions and summed spike counts over a dataset.
    pub fn evaluate(
        &self,
        data: &Dataset,
        transmit: &[f64],
        cfg: &EngineConfig,
        seed: u64,
    ) -> Result<(usize, Vec<u64>)> {
        data.validate()?;
        let n = self.order.len();
        data.samples
            .par_iter()
            .enumerate()
            .map(|(idx, s)| {
                let r = self.run(s, transmit, cfg, seed, idx as u64)?;
                let counts: Vec<u64> = r.counts.iter().map(|&c| u64::from(c)).collect();
                Ok((usize::from(r.prediction == s.label), counts))
            })
            .try_reduce(
                || (0, vec![0u64; n]),
                |(a, mut ca), (b, cb)| {
                    for (x, y) in ca.iter_mut().zip(cb) {
                        *x += y;
                    }
                    Ok((a + b, ca))
                },
            )
    }

    pub fn accuracy_with(&self, data: &Dataset, transmit: &[f64], cfg: &EngineConfig, seeds: &[u64]) -> Result<f64> {
        if seeds.is_empty() {
            return Err(param("seeds", "at least one seed required"));
        }
        let mut total = 0.0;
        for &s in seeds {
            let (correct, _) = self.evaluate(data, transmit, cfg, s)?;
            total += correct as f64 / data.samples.len() as f64;
        }
        Ok(total / seeds.len() as f64)
    }

    pub fn uniform_transmit(&self, p: f64) -> Vec<f64> {
        vec![p; self.order.len()]
    }
}

/// Predicted class for one sample.
pub fn infer(model: &ModelGraph, sample: &Sample, cfg: &EngineConfig, seed: u64) -> Result<usize> {
    cfg.validate()?;
    let net = Network::new(model)?;
    Ok(net.run(sample, &net.uniform_transmit(cfg.pr0), cfg, seed, 0)?.prediction)
}

/// Fraction correct, averaged over `seeds`.
pub fn accuracy(model: &ModelGraph, data: &Dataset, cfg: &EngineConfig, seeds: &[u64]) -> Result<f64> {
    cfg.validate()?;
    let net = Network::new(model)?;
    net.accuracy_with(data, &net.uniform_transmit(cfg.pr0), cfg, seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{Edge, LifParams, Neuron};

    fn identity(k: usize) -> ModelGraph {
        let mut neurons = Vec::new();
        let mut edges = Vec::new();
        for _ in 0..k {
            neurons.push(Neuron { layer: 0, fault: None });
        }
        for i in 0..k {
            neurons.push(Neuron { layer: 1, fault: None });
            edges.push(Edge { pre: i, post: k + i, code: 1, fault: None });
        }
        ModelGraph {
            lif: LifParams::default(),
            layer_scales: vec![1.0, 2.0],
            neurons,
            edges,
            outputs: (k..2 * k).collect(),
        }
    }

    #[test]
    fn quiescent_input_predicts_class_zero() {
        let m = identity(3);
        let s = Sample { rates: vec![0.0; 3], label: 0 };
        let net = Network::new(&m).unwrap();
        let r = net.run(&s, &net.uniform_transmit(0.5), &EngineConfig::default(), 1, 0).unwrap();
        assert!(r.counts.iter().all(|&c| c == 0));
        assert_eq!(r.prediction, 0);
    }

    #[test]
    fn single_active_path_wins() {
        let m = identity(4);
        for k in 0..4 {
            let mut rates = vec![0.0; 4];
            rates[k] = 200.0;
            let s = Sample { rates, label: k };
            assert_eq!(infer(&m, &s, &EngineConfig::default(), 5).unwrap(), k);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = identity(2);
        let s = Sample { rates: vec![1.0], label: 0 };
        assert!(infer(&m, &s, &EngineConfig::default(), 0).is_err());
    }

    #[test]
    fn constant_predictor_is_perfect_on_its_class() {
        let m = identity(2);
        let data = Dataset {
            classes: 2,
            samples: (0..10).map(|_| Sample { rates: vec![0.0, 0.0], label: 0 }).collect(),
        };
        assert_eq!(accuracy(&m, &data, &EngineConfig::default(), &[1, 2]).unwrap(), 1.0);
        let empty = Dataset { classes: 2, samples: vec![] };
        assert!(accuracy(&m, &empty, &EngineConfig::default(), &[1]).is_err());
    }

    #[test]
    fn zeroed_model_is_at_chance_on_balanced_data() {
        let mut m = identity(2);
        for e in &mut m.edges {
            e.code = 0;
        }
        let mut rng = crate::rng::seeded(3);
        use rand::Rng;
        let samples = (0..200)
            .map(|i| Sample { rates: vec![rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)], label: i % 2 })
            .collect();
        let data = Dataset { classes: 2, samples };
        let seeds: Vec<u64> = (0..10).collect();
        let acc = accuracy(&m, &data, &EngineConfig::default(), &seeds).unwrap();
        assert!((acc - 0.5).abs() <= 0.1);
    }

    #[test]
    fn runs_are_deterministic() {
        let m = identity(3);
        let s = Sample { rates: vec![50.0, 80.0, 20.0], label: 1 };
        let net = Network::new(&m).unwrap();
        let t = net.uniform_transmit(0.5);
        let a = net.run(&s, &t, &EngineConfig::default(), 9, 4).unwrap();
        let b = net.run(&s, &t, &EngineConfig::default(), 9, 4).unwrap();
        assert_eq!(a, b);
    }
}
