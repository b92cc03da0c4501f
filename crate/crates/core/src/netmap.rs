//! Partitioning a model graph onto neuromorphic cores.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::snn::ModelGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreKind {
    Crossbar,
    Ubrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreSpec {
    pub kind: CoreKind,
    /// Neuron slots per core layer; crossbar `[L_x, L_y]`, μBrain `[L_x, L_y, L_z]`.
    pub layer_caps: Vec<usize>,
    pub neuron_cap: usize,
    pub syn_cap: usize,
    pub max_astrocytes: usize,
}

impl CoreSpec {
    /// N×N crossbar with four astrocytes.
    pub fn crossbar(n: usize) -> Self {
        Self { kind: CoreKind::Crossbar, layer_caps: vec![n, n], neuron_cap: 2 * n, syn_cap: n * n, max_astrocytes: 4 }
    }

    /// Three-layer N/M/P core with six astrocytes.
    pub fn ubrain(n: usize, m: usize, p: usize) -> Self {
        Self {
            kind: CoreKind::Ubrain,
            layer_caps: vec![n, m, p],
            neuron_cap: n + m + p,
            syn_cap: n * m + m * p,
            max_astrocytes: 6,
        }
    }

    pub fn default_crossbar() -> Self {
        Self::crossbar(128)
    }

    pub fn default_ubrain() -> Self {
        Self::ubrain(256, 64, 16)
    }

    /// Arbitrary capacities; the kind still picks the distance rule.
    pub fn custom(kind: CoreKind, layer_caps: Vec<usize>, neuron_cap: usize, syn_cap: usize, max_astrocytes: usize) -> Result<Self> {
        let c = Self { kind, layer_caps, neuron_cap, syn_cap, max_astrocytes };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.max_distance() + 1;
        if self.layer_caps.len() != want {
            return Err(param("layer_caps", format!("{:?} core needs {want} layers", self.kind)));
        }
        if self.neuron_cap == 0 || self.syn_cap == 0 {
            return Err(param("neuron_cap/syn_cap", "capacities must be >= 1"));
        }
        Ok(())
    }

    /// Largest hop distance gathered per round.
    pub fn max_distance(&self) -> usize {
        match self.kind {
            CoreKind::Crossbar => 1,
            CoreKind::Ubrain => 2,
        }
    }

    /// Core layer holding a neuron at distance `d`: the farthest band is layer 0.
    pub fn layer_for_distance(&self, d: usize) -> usize {
        self.max_distance() - d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub neurons: Vec<usize>,
    /// Edges terminating on a neuron of this cluster.
    pub synapses: usize,
    /// Neuron ids per core layer.
    pub layers: Vec<Vec<usize>>,
    pub core: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub clusters: Vec<Cluster>,
    /// Cluster-level edges `(from, to)`, deduplicated and sorted.
    pub edges: Vec<(usize, usize)>,
}

impl Mapping {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn cluster_of(&self, neurons: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; neurons];
        for (c, cl) in self.clusters.iter().enumerate() {
            for &n in &cl.neurons {
                if n < neurons {
                    owner[n] = Some(c);
                }
            }
        }
        owner
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub cluster: Option<usize>,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cluster {
            Some(c) => write!(f, "cluster {c}: {}", self.constraint),
            None => write!(f, "{}", self.constraint),
        }
    }
}

fn predecessors(graph: &ModelGraph) -> Vec<Vec<usize>> {
    let mut pre = vec![Vec::new(); graph.neurons.len()];
    for e in &graph.edges {
        pre[e.post].push(e.pre);
    }
    pre
}

fn fan_in(graph: &ModelGraph) -> Vec<usize> {
    let mut f = vec![0; graph.neurons.len()];
    for e in &graph.edges {
        f[e.post] += 1;
    }
    f
}

/// Multi-source BFS over reversed edges, restricted to `alive`.
fn bfs(pre: &[Vec<usize>], sources: &[usize], alive: &[bool]) -> Vec<Option<usize>> {
    let mut dist = vec![None; pre.len()];
    let mut q = VecDeque::new();
    for &s in sources {
        if alive[s] && dist[s].is_none() {
            dist[s] = Some(0);
            q.push_back(s);
        }
    }
    while let Some(v) = q.pop_front() {
        let d = dist[v].expect("queued nodes have a distance");
        for &u in &pre[v] {
            if alive[u] && dist[u].is_none() {
                dist[u] = Some(d + 1);
                q.push_back(u);
            }
        }
    }
    dist
}

/// Hop distance from each neuron to its nearest output.
pub fn distance_labels(graph: &ModelGraph) -> Result<Vec<usize>> {
    let pre = predecessors(graph);
    let alive = vec![true; graph.neurons.len()];
    let dist = bfs(&pre, &graph.outputs, &alive);
    let missing: Vec<usize> = (0..dist.len()).filter(|&i| dist[i].is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Unreachable(missing));
    }
    Ok(dist.into_iter().map(|d| d.expect("checked")).collect())
}

struct Open {
    neurons: Vec<usize>,
    synapses: usize,
    layers: Vec<Vec<usize>>,
}

/// Greedy distance-band clustering. Each round gathers the neurons within the
/// core's distance rule of the current targets, packs them first-fit in
/// (distance, id) order, removes them and recomputes distances.
pub fn partition(graph: &ModelGraph, core: &CoreSpec) -> Result<Mapping> {
    core.validate()?;
    graph.validate()?;
    let n = graph.neurons.len();
    let pre = predecessors(graph);
    let fan = fan_in(graph);
    if let Some(v) = (0..n).find(|&v| fan[v] > core.syn_cap) {
        return Err(Error::Infeasible { neuron: v, fan_in: fan[v], capacity: core.syn_cap });
    }
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut targets: Vec<usize> = graph.outputs.clone();
    let mut clusters: Vec<Cluster> = Vec::new();
    while remaining > 0 {
        let dist = bfs(&pre, &targets, &alive);
        let mut cand: Vec<(usize, usize)> = (0..n)
            .filter(|&v| alive[v])
            .filter_map(|v| dist[v].filter(|&d| d <= core.max_distance()).map(|d| (d, v)))
            .collect();
        if cand.is_empty() {
            let stuck: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
            return Err(Error::Unreachable(stuck));
        }
        cand.sort_unstable();
        let mut open: Vec<Open> = Vec::new();
        for &(d, v) in &cand {
            let layer = core.layer_for_distance(d);
            if core.layer_caps[layer] == 0 {
                return Err(param("layer_caps", format!("layer {layer} has no room for distance {d}")));
            }
            let fits = |o: &Open| {
                o.neurons.len() < core.neuron_cap
                    && o.synapses + fan[v] <= core.syn_cap
                    && o.layers[layer].len() < core.layer_caps[layer]
            };
            let slot = match open.iter().position(fits) {
                Some(i) => i,
                None => {
                    open.push(Open { neurons: Vec::new(), synapses: 0, layers: vec![Vec::new(); core.layer_caps.len()] });
                    open.len() - 1
                }
            };
            let o = &mut open[slot];
            o.neurons.push(v);
            o.synapses += fan[v];
            o.layers[layer].push(v);
        }
        for &(_, v) in &cand {
            alive[v] = false;
        }
        remaining -= cand.len();
        for o in open {
            let core_id = clusters.len();
            clusters.push(Cluster { neurons: o.neurons, synapses: o.synapses, layers: o.layers, core: core_id });
        }
        let mut next: BTreeSet<usize> = graph.outputs.iter().copied().filter(|&o| alive[o]).collect();
        for e in &graph.edges {
            if alive[e.pre] && !alive[e.post] {
                next.insert(e.pre);
            }
        }
        targets = next.into_iter().collect();
    }
    let owner = {
        let mut o = vec![0; n];
        for (c, cl) in clusters.iter().enumerate() {
            for &v in &cl.neurons {
                o[v] = c;
            }
        }
        o
    };
    let edges: BTreeSet<(usize, usize)> = graph
        .edges
        .iter()
        .filter(|e| owner[e.pre] != owner[e.post])
        .map(|e| (owner[e.pre], owner[e.post]))
        .collect();
    Ok(Mapping { clusters, edges: edges.into_iter().collect() })
}

/// `⌈params / syn_cap⌉`.
pub fn cluster_count_estimate(param_count: u64, core: &CoreSpec) -> u64 {
    param_count.div_ceil(core.syn_cap as u64)
}

/// Every broken capacity, layer or coverage constraint of `mapping`.
pub fn validate(mapping: &Mapping, core: &CoreSpec, graph: &ModelGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = graph.neurons.len();
    let fan = fan_in(graph);
    let mut seen = vec![0usize; n];
    for (c, cl) in mapping.clusters.iter().enumerate() {
        let mut v = |s: String| out.push(Violation { cluster: Some(c), constraint: s });
        if cl.neurons.len() > core.neuron_cap {
            v(format!("{} neurons exceed capacity {}", cl.neurons.len(), core.neuron_cap));
        }
        if cl.synapses > core.syn_cap {
            v(format!("{} synapses exceed capacity {}", cl.synapses, core.syn_cap));
        }
        let actual: usize = cl.neurons.iter().filter(|&&x| x < n).map(|&x| fan[x]).sum();
        if actual != cl.synapses {
            v(format!("synapse count {} differs from incoming edges {actual}", cl.synapses));
        }
        if cl.layers.len() != core.layer_caps.len() {
            v(format!("{} layers for a {}-layer core", cl.layers.len(), core.layer_caps.len()));
        } else {
            for (l, members) in cl.layers.iter().enumerate() {
                if members.len() > core.layer_caps[l] {
                    v(format!("layer {l} holds {} neurons, capacity {}", members.len(), core.layer_caps[l]));
                }
            }
        }
        let mut in_layers: Vec<usize> = cl.layers.iter().flatten().copied().collect();
        in_layers.sort_unstable();
        let mut members = cl.neurons.clone();
        members.sort_unstable();
        if in_layers != members {
            v("layers do not partition the cluster".to_string());
        }
        for &x in &cl.neurons {
            if x >= n {
                v(format!("neuron {x} does not exist"));
            } else {
                seen[x] += 1;
            }
        }
    }
    for (x, &k) in seen.iter().enumerate() {
        if k == 0 {
            out.push(Violation { cluster: None, constraint: format!("neuron {x} is not in any cluster") });
        } else if k > 1 {
            out.push(Violation { cluster: None, constraint: format!("neuron {x} appears in {k} clusters") });
        }
    }
    out
}

/// One row of the evaluated-model table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelInfo {
    pub name: &'static str,
    pub params: u64,
    pub clusters_ubrain: u64,
    pub clusters_crossbar: u64,
}

pub const EVALUATED_MODELS: [ModelInfo; 7] = [
    ModelInfo { name: "LeNet", params: 505_942, clusters_ubrain: 30, clusters_crossbar: 31 },
    ModelInfo { name: "AlexNet", params: 41_241_906, clusters_ubrain: 2_370, clusters_crossbar: 2_518 },
    ModelInfo { name: "VGGNet", params: 32_850_250, clusters_ubrain: 1_888, clusters_crossbar: 2_006 },
    ModelInfo { name: "ResNet", params: 575_298, clusters_ubrain: 34, clusters_crossbar: 36 },
    ModelInfo { name: "DenseNet", params: 7_047_754, clusters_ubrain: 405, clusters_crossbar: 431 },
    ModelInfo { name: "MobileNet", params: 2_280_586, clusters_ubrain: 132, clusters_crossbar: 140 },
    ModelInfo { name: "Xception", params: 20_881_970, clusters_ubrain: 1_200, clusters_crossbar: 1_275 },
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{Edge, LifParams, Neuron};
    use proptest::prelude::*;

    fn graph(layers: &[usize], edges: &[(usize, usize)], outputs: &[usize]) -> ModelGraph {
        ModelGraph {
            lif: LifParams::default(),
            layer_scales: vec![1.0; layers.iter().max().map_or(1, |m| m + 1)],
            neurons: layers.iter().map(|&l| Neuron { layer: l, fault: None }).collect(),
            edges: edges.iter().map(|&(pre, post)| Edge { pre, post, code: 1, fault: None }).collect(),
            outputs: outputs.to_vec(),
        }
    }

    fn chain(k: usize) -> ModelGraph {
        let edges: Vec<_> = (0..k - 1).map(|i| (i, i + 1)).collect();
        graph(&(0..k).collect::<Vec<_>>(), &edges, &[k - 1])
    }

    #[test]
    fn capacity_identities() {
        let u = CoreSpec::default_ubrain();
        assert_eq!(u.syn_cap, 17_408);
        assert_eq!(u.neuron_cap, 336);
        assert_eq!(u.max_astrocytes, 6);
        let c = CoreSpec::default_crossbar();
        assert_eq!(c.syn_cap, 16_384);
        assert_eq!(c.neuron_cap, 256);
        assert_eq!(c.max_astrocytes, 4);
    }

    #[test]
    fn distances() {
        let single = graph(&[0], &[], &[0]);
        assert_eq!(distance_labels(&single).unwrap(), vec![0]);
        assert_eq!(distance_labels(&chain(3)).unwrap(), vec![2, 1, 0]);
        let broken = graph(&[0, 1, 1], &[(0, 1)], &[1]);
        assert!(matches!(distance_labels(&broken), Err(Error::Unreachable(v)) if v == vec![2]));
    }

    #[test]
    fn small_graph_fits_one_core() {
        let g = graph(&[0, 0, 1, 1], &[(0, 2), (1, 2), (0, 3), (1, 3)], &[2, 3]);
        let m = partition(&g, &CoreSpec::default_ubrain()).unwrap();
        assert_eq!(m.clusters.len(), 1);
        assert!(validate(&m, &CoreSpec::default_ubrain(), &g).is_empty());
    }

    #[test]
    fn chain_golden_trace() {
        // Rounds: {5,4}, then {3,2}, then {1,0}.
        let core = CoreSpec::custom(CoreKind::Crossbar, vec![3, 3], 3, 2, 4).unwrap();
        let g = chain(6);
        let m = partition(&g, &core).unwrap();
        let sets: Vec<Vec<usize>> = m.clusters.iter().map(|c| c.neurons.clone()).collect();
        assert_eq!(sets, vec![vec![5, 4], vec![3, 2], vec![1, 0]]);
        assert_eq!(m.clusters.iter().map(|c| c.synapses).collect::<Vec<_>>(), vec![2, 2, 1]);
        assert_eq!(m.edges, vec![(1, 0), (2, 1)]);
        assert!(validate(&m, &core, &g).is_empty());
    }

    #[test]
    fn oversized_fan_in_is_infeasible() {
        let core = CoreSpec::custom(CoreKind::Crossbar, vec![3, 3], 3, 1, 4).unwrap();
        let g = graph(&[0, 0, 1], &[(0, 2), (1, 2)], &[2]);
        assert!(matches!(partition(&g, &core), Err(Error::Infeasible { neuron: 2, fan_in: 2, capacity: 1 })));
    }

    #[test]
    fn validation_reports_violations() {
        let core = CoreSpec::custom(CoreKind::Crossbar, vec![3, 3], 3, 2, 4).unwrap();
        let g = chain(6);
        let mut m = partition(&g, &core).unwrap();
        m.clusters[0].synapses = 3;
        let v = validate(&m, &core, &g);
        assert!(v.iter().any(|x| x.cluster == Some(0) && x.constraint.contains("exceed")));
        let mut m = partition(&g, &core).unwrap();
        m.clusters[1].neurons.push(5);
        m.clusters[1].layers[0].push(5);
        let v = validate(&m, &core, &g);
        assert!(v.iter().any(|x| x.constraint.contains("appears in 2 clusters")));
    }

    #[test]
    fn estimates_match_table() {
        let u = CoreSpec::default_ubrain();
        let c = CoreSpec::default_crossbar();
        for m in EVALUATED_MODELS {
            assert_eq!(cluster_count_estimate(m.params, &u), m.clusters_ubrain, "{}", m.name);
            assert_eq!(cluster_count_estimate(m.params, &c), m.clusters_crossbar, "{}", m.name);
        }
        assert_eq!(cluster_count_estimate(0, &u), 0);
    }

    fn brute_distance(g: &ModelGraph, v: usize) -> Option<usize> {
        if g.outputs.contains(&v) {
            return Some(0);
        }
        g.edges.iter().filter(|e| e.pre == v).filter_map(|e| brute_distance(g, e.post).map(|d| d + 1)).min()
    }

    fn random_dag() -> impl Strategy<Value = ModelGraph> {
        (2usize..=12).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
            (Just(n), proptest::collection::vec(proptest::bool::weighted(0.3), pairs.len()), Just(pairs))
        })
        .prop_map(|(n, keep, pairs)| {
            let mut edges: Vec<(usize, usize)> = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
            // Chain every node forward so the last node reaches everything.
            for i in 0..n - 1 {
                if !edges.iter().any(|&(a, _)| a == i) {
                    edges.push((i, i + 1));
                }
            }
            graph(&(0..n).collect::<Vec<_>>(), &edges, &[n - 1])
        })
    }

    proptest! {
        #[test]
        fn bfs_matches_path_enumeration(g in random_dag()) {
            let d = distance_labels(&g).unwrap();
            for (v, &dv) in d.iter().enumerate() {
                prop_assert_eq!(Some(dv), brute_distance(&g, v));
            }
        }

        #[test]
        fn partitions_respect_capacities(g in random_dag(), syn in 3usize..8, neu in 2usize..5, ubrain in proptest::bool::ANY) {
            let core = if ubrain {
                CoreSpec::custom(CoreKind::Ubrain, vec![neu, neu, neu], neu, syn.max(11), 6).unwrap()
            } else {
                CoreSpec::custom(CoreKind::Crossbar, vec![neu, neu], neu, syn.max(11), 4).unwrap()
            };
            let m = partition(&g, &core).unwrap();
            prop_assert!(validate(&m, &core, &g).is_empty());
            prop_assert!(m.clusters.len() as u64 >= cluster_count_estimate(g.edges.len() as u64, &core));
        }
    }
}
