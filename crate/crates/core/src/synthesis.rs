//! Greedy astrocyte insertion per cluster layer under an accuracy threshold.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::astro::AstroParams;
use crate::error::{param, Error, Result};
use crate::netmap::{CoreSpec, Mapping};
use crate::rng::{self, uniform_at};
use crate::snn::{apply_fault, Coupling, Dataset, EngineConfig, FaultKind, ModelGraph, Param, RepairContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Astrocytes per layer limited by the core's hardware share.
    Platform,
    /// Astrocytes per layer limited only by the layer size.
    CoDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Single-fault trials per a_min evaluation.
    pub n_r: usize,
    /// Accuracy threshold; `None` uses the healthy accuracy under the same seeds.
    pub a_th: Option<f64>,
    /// Explicit cap; `None` derives it from `preset`.
    pub max_astro_per_layer: Option<usize>,
    pub preset: Preset,
    pub kinds: Vec<FaultKind>,
    /// Inference seeds per accuracy evaluation.
    pub eval_seeds: usize,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            n_r: 200,
            a_th: None,
            max_astro_per_layer: None,
            preset: Preset::Platform,
            kinds: FaultKind::ALL.to_vec(),
            eval_seeds: 1,
            seed: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 {
            return Err(param("n_r", "must be >= 1"));
        }
        if let Some(a) = self.a_th {
            if !(0.0..=1.0).contains(&a) {
                return Err(param("a_th", format!("must lie in [0, 1], got {a}")));
            }
        }
        if self.kinds.is_empty() {
            return Err(param("kinds", "at least one fault kind required"));
        }
        if self.eval_seeds == 0 {
            return Err(param("eval_seeds", "must be >= 1"));
        }
        Ok(())
    }

    pub fn layer_cap(&self, core: &CoreSpec, layer_size: usize) -> usize {
        match (self.max_astro_per_layer, self.preset) {
            (Some(m), _) => m.min(layer_size),
            (None, Preset::Platform) => (core.max_astrocytes / core.layer_caps.len()).min(layer_size),
            (None, Preset::CoDesign) => layer_size,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.eval_seeds as u64).map(|k| rng::derive(self.seed, 200 + k)).collect()
    }
}

/// Shared read-only inputs of a synthesis run.
#[derive(Debug, Clone, Copy)]
pub struct ModelContext<'a> {
    pub model: &'a ModelGraph,
    pub data: &'a Dataset,
    pub astro: &'a AstroParams,
    pub engine: &'a EngineConfig,
    pub coupling: &'a Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAllocation {
    pub layer: usize,
    pub neurons: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    /// a_min observed before each insertion decision.
    pub history: Vec<f64>,
    /// The cap was reached with a_min still below threshold.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAllocation {
    pub cluster: usize,
    pub layers: Vec<LayerAllocation>,
}

impl ClusterAllocation {
    pub fn used(&self) -> usize {
        self.layers.iter().map(|l| l.groups.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstroAllocation {
    pub clusters: Vec<ClusterAllocation>,
}

impl AstroAllocation {
    pub fn empty() -> Self {
        Self { clusters: Vec::new() }
    }

    pub fn groups(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.clusters.iter().flat_map(|c| c.layers.iter()).flat_map(|l| l.groups.iter())
    }

    pub fn total(&self) -> usize {
        self.clusters.iter().map(ClusterAllocation::used).sum()
    }

    /// Astrocytes in use per cluster, indexed by cluster id.
    pub fn used_per_cluster(&self, clusters: usize) -> Vec<usize> {
        let mut used = vec![0; clusters];
        for c in &self.clusters {
            if c.cluster < clusters {
                used[c.cluster] += c.used();
            }
        }
        used
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.clusters {
            for l in &c.layers {
                let mut covered: Vec<usize> = l.groups.iter().flatten().copied().collect();
                covered.sort_unstable();
                let mut want = l.neurons.clone();
                want.sort_unstable();
                if !l.groups.is_empty() && covered != want {
                    return Err(Error::Allocation(format!(
                        "cluster {} layer {}: groups do not partition the layer",
                        c.cluster, l.layer
                    )));
                }
                let sizes = l.groups.iter().map(Vec::len);
                if let (Some(lo), Some(hi)) = (sizes.clone().min(), sizes.max()) {
                    if hi - lo > 1 {
                        return Err(Error::Allocation(format!(
                            "cluster {} layer {}: group sizes {lo}..{hi} are unbalanced",
                            c.cluster, l.layer
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstroEnabledModel {
    pub mapping: Mapping,
    pub allocation: AstroAllocation,
}

impl AstroEnabledModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Log rows `(cluster, layer, iteration, a_min, astro count)`.
    pub fn write_log_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cluster,layer,iteration,a_min,astrocytes")?;
        for c in &self.allocation.clusters {
            for l in &c.layers {
                for (i, a) in l.history.iter().enumerate() {
                    writeln!(w, "{},{},{},{:.6},{}", c.cluster, l.layer, i, a, i)?;
                }
            }
        }
        Ok(())
    }
}

/// Split `members` into `k` contiguous groups whose sizes differ by at most one,
/// larger groups first.
pub fn split_groups(members: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 || members.is_empty() {
        return Vec::new();
    }
    let k = k.min(members.len());
    let base = members.len() / k;
    let extra = members.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for g in 0..k {
        let size = base + usize::from(g < extra);
        out.push(members[at..at + size].to_vec());
        at += size;
    }
    out
}

/// Faultable parameters of one layer: edges terminating on it, then its neurons.
fn layer_params(model: &ModelGraph, neurons: &[usize], kinds: &[FaultKind]) -> Vec<Param> {
    let mut member = vec![false; model.neurons.len()];
    for &n in neurons {
        member[n] = true;
    }
    let mut out = Vec::new();
    if kinds.iter().any(|k| k.targets_edges()) {
        out.extend((0..model.edges.len()).filter(|&e| member[model.edges[e].post]).map(Param::Edge));
    }
    if kinds.contains(&FaultKind::NeuronStuckOff) {
        out.extend(neurons.iter().map(|&n| Param::Neuron(n)));
    }
    out
}

/// Trial `t` of layer `layer` in cluster `cluster`: (parameter, kind, bit).
fn draw_fault(params: &[Param], kinds: &[FaultKind], key: u64, layer: usize, t: usize) -> (Param, FaultKind, u8) {
    let pick = |u: f64, n: usize| ((u * n as f64) as usize).min(n - 1);
    let p = params[pick(uniform_at(key, layer as u64, t as u64, 0), params.len())];
    let kind = match p {
        Param::Neuron(_) => FaultKind::NeuronStuckOff,
        Param::Edge(_) => {
            let mut ek: Vec<FaultKind> = kinds.iter().copied().filter(|k| k.targets_edges()).collect();
            ek.sort();
            ek.dedup();
            ek[pick(uniform_at(key, layer as u64, t as u64, 1), ek.len())]
        }
    };
    let bit = match kind {
        FaultKind::WeightBitFlip => u8::from(uniform_at(key, layer as u64, t as u64, 2) < 0.5),
        _ => 0,
    };
    (p, kind, bit)
}

/// Minimum accuracy over `n_r` single faults on `neurons`, with `groups` attached.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_min_accuracy(
    ctx: &ModelContext<'_>,
    cluster: usize,
    layer: usize,
    neurons: &[usize],
    groups: &[Vec<usize>],
    n_r: usize,
    kinds: &[FaultKind],
    seed: u64,
    eval_seeds: &[u64],
) -> Result<f64> {
    if neurons.is_empty() {
        return Err(param("layer", "layer has no neurons"));
    }
    let params = layer_params(ctx.model, neurons, kinds);
    if params.is_empty() {
        return Err(param("kinds", "no parameter of this layer can be faulted"));
    }
    let repair = RepairContext::new(ctx.model, groups, ctx.astro, ctx.engine, ctx.coupling, ctx.data)?;
    let key = rng::derive(seed, cluster as u64);
    let mut cache: HashMap<(Param, FaultKind, u8), f64> = HashMap::new();
    let mut a_min = f64::INFINITY;
    for t in 0..n_r {
        let f = draw_fault(&params, kinds, key, layer, t);
        let acc = match cache.get(&f) {
            Some(&a) => a,
            None => {
                let mut faulted = ctx.model.clone();
                apply_fault(&mut faulted, f.0, f.1, f.2)?;
                let a = repair.accuracy(&faulted, ctx.data, eval_seeds)?;
                cache.insert(f, a);
                a
            }
        };
        a_min = a_min.min(acc);
    }
    Ok(a_min)
}

fn synthesize_cluster(
    ctx: &ModelContext<'_>,
    mapping: &Mapping,
    cluster: usize,
    config: &SynthesisConfig,
    core: &CoreSpec,
    a_th: f64,
    seeds: &[u64],
) -> Result<ClusterAllocation> {
    let cl = &mapping.clusters[cluster];
    if cl.layers.len() != core.layer_caps.len() {
        return Err(Error::Allocation(format!("cluster {cluster} is not layerized for this core")));
    }
    let mut layers = Vec::new();
    for (li, neurons) in cl.layers.iter().enumerate() {
        if neurons.is_empty() {
            continue;
        }
        let mut members = neurons.clone();
        members.sort_unstable();
        // Nothing in this layer can fail under the configured fault kinds.
        if layer_params(ctx.model, &members, &config.kinds).is_empty() {
            continue;
        }
        let cap = config.layer_cap(core, members.len());
        let mut alloc = LayerAllocation { layer: li, neurons: members, groups: Vec::new(), history: Vec::new(), saturated: false };
        loop {
            let a_min = evaluate_min_accuracy(
                ctx,
                cluster,
                li,
                &alloc.neurons,
                &alloc.groups,
                config.n_r,
                &config.kinds,
                config.seed,
                seeds,
            )?;
            alloc.history.push(a_min);
            if a_min >= a_th {
                break;
            }
            if alloc.groups.len() >= cap {
                alloc.saturated = true;
                break;
            }
            alloc.groups = split_groups(&alloc.neurons, alloc.groups.len() + 1);
        }
        layers.push(alloc);
    }
    Ok(ClusterAllocation { cluster, layers })
}

/// Healthy accuracy under the synthesis seeds.
pub fn baseline_accuracy(ctx: &ModelContext<'_>, config: &SynthesisConfig) -> Result<f64> {
    crate::snn::accuracy(ctx.model, ctx.data, ctx.engine, &config.seeds())
}

/// Insert astrocytes layer by layer until a_min reaches the threshold or the cap.
/// Clusters are processed independently and in parallel.
pub fn insert_astrocytes(
    ctx: &ModelContext<'_>,
    mapping: &Mapping,
    config: &SynthesisConfig,
    core: &CoreSpec,
) -> Result<AstroEnabledModel> {
    config.validate()?;
    core.validate()?;
    let issues = crate::netmap::validate(mapping, core, ctx.model);
    if let Some(v) = issues.first() {
        return Err(Error::Allocation(format!("invalid mapping: {v}")));
    }
    let seeds = config.seeds();
    let a_th = match config.a_th {
        Some(a) => a,
        None => baseline_accuracy(ctx, config)?,
    };
    let clusters: Vec<ClusterAllocation> = (0..mapping.clusters.len())
        .into_par_iter()
        .map(|c| synthesize_cluster(ctx, mapping, c, config, core, a_th, &seeds))
        .collect::<Result<_>>()?;
    let allocation = AstroAllocation { clusters };
    allocation.validate()?;
    Ok(AstroEnabledModel { mapping: mapping.clone(), allocation })
}

/// Astrocytes left idle per core.
pub fn disable_unused(allocation: &AstroAllocation, clusters: usize, core: &CoreSpec) -> Result<Vec<usize>> {
    allocation
        .used_per_cluster(clusters)
        .into_iter()
        .enumerate()
        .map(|(c, used)| {
            core.max_astrocytes.checked_sub(used).ok_or_else(|| {
                Error::Allocation(format!("cluster {c} uses {used} astrocytes, core has {}", core.max_astrocytes))
            })
        })
        .collect()
}
