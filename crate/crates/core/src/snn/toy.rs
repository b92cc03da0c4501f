use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use super::{accuracy, Dataset, Edge, EngineConfig, LifParams, ModelGraph, Network, Neuron, Sample};
use crate::error::{param, Result};
use crate::rng;

/// Hidden weights favour excitation so most units respond to some region of input space.
const HIDDEN_CODES: [i8; 4] = [1, 1, 0, -1];

/// Synthetic classification task and network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    /// Neurons per layer, inputs first; the last entry is the class count.
    pub layers: Vec<usize>,
    pub seed: u64,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    /// Standard deviation of each blob, in units of the unit input cube.
    pub spread: f64,
    /// Input rate (Hz) at coordinate 1.
    pub max_rate: f64,
    pub lif: LifParams,
    pub engine: EngineConfig,
    /// Seeds averaged when recording the baseline accuracy.
    pub baseline_seeds: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            layers: vec![4, 64, 2],
            seed: 0,
            train_per_class: 100,
            eval_per_class: 50,
            spread: 0.08,
            max_rate: 200.0,
            lif: LifParams { leak_tau: 0.05, ..LifParams::default() },
            engine: EngineConfig::default(),
            baseline_seeds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub model: ModelGraph,
    pub train: Dataset,
    pub eval: Dataset,
    /// Spiking accuracy on `eval`, averaged over the baseline seeds.
    pub baseline_accuracy: f64,
}

impl ToyModel {
    /// Seeds used for the recorded baseline.
    pub fn baseline_seeds(spec: &ToySpec) -> Vec<u64> {
        (0..spec.baseline_seeds.max(1)).map(|k| rng::derive(spec.seed, 100 + k)).collect()
    }
}

/// Train a small classifier on Gaussian blobs and quantize it to 2-bit codes.
pub fn build_toy_model(spec: &ToySpec) -> Result<ToyModel> {
    if spec.layers.len() < 2 {
        return Err(param("layers", "need at least an input and an output layer"));
    }
    if spec.layers.contains(&0) {
        return Err(param("layers", "every layer needs at least one neuron"));
    }
    let classes = *spec.layers.last().expect("checked length");
    if classes < 2 {
        return Err(param("layers", "class count must be >= 2"));
    }
    if spec.train_per_class == 0 || spec.eval_per_class == 0 {
        return Err(param("train_per_class/eval_per_class", "must be >= 1"));
    }
    if !(spec.spread >= 0.0 && spec.max_rate > 0.0) {
        return Err(param("spread/max_rate", "need spread >= 0 and max_rate > 0"));
    }
    spec.lif.validate()?;
    spec.engine.validate()?;

    let mut rng = rng::seeded(spec.seed);
    let dim = spec.layers[0];
    let centroids = blob_centroids(&mut rng, classes, dim);
    let noise = Normal::new(0.0, spec.spread.max(1e-12)).map_err(|e| param("spread", e.to_string()))?;
    let draw = |per_class: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Dataset {
        let mut samples = Vec::with_capacity(per_class * classes);
        for i in 0..per_class * classes {
            let label = i % classes;
            let rates = centroids[label]
                .iter()
                .map(|&c| (c + noise.sample(rng)).clamp(0.0, 1.0) * spec.max_rate)
                .collect();
            samples.push(Sample { rates, label });
        }
        Dataset { classes, samples }
    };
    let train = draw(spec.train_per_class, &mut rng);
    let eval = draw(spec.eval_per_class, &mut rng);

    let pr0 = spec.engine.pr0;
    let lif = &spec.lif;
    let mut neurons = Vec::new();
    let mut offsets = Vec::new();
    for (l, &n) in spec.layers.iter().enumerate() {
        offsets.push(neurons.len());
        neurons.extend((0..n).map(|_| Neuron { layer: l, fault: None }));
    }
    let mut edges = Vec::new();
    let mut scales = vec![1.0; spec.layers.len()];
    // Rate-model activity of the current layer per training sample.
    let mut activity: Vec<Vec<f64>> = train.samples.iter().map(|s| s.rates.clone()).collect();

    let last = spec.layers.len() - 1;
    for l in 1..last {
        let (n_pre, n_post) = (spec.layers[l - 1], spec.layers[l]);
        let codes: Vec<i8> = (0..n_pre * n_post).map(|_| HIDDEN_CODES[rng.random_range(0..4)]).collect();
        let mut unit_drive = Vec::new();
        for a in &activity {
            for j in 0..n_post {
                unit_drive.push((0..n_pre).map(|i| f64::from(codes[j * n_pre + i]) * pr0 * a[i]).sum::<f64>());
            }
        }
        let scale = hidden_scale(&mut unit_drive, lif);
        scales[l] = scale;
        activity = activity
            .iter()
            .map(|a| {
                (0..n_post)
                    .map(|j| lif.rate(scale * (0..n_pre).map(|i| f64::from(codes[j * n_pre + i]) * pr0 * a[i]).sum::<f64>()))
                    .collect()
            })
            .collect();
        for j in 0..n_post {
            for i in 0..n_pre {
                edges.push(Edge { pre: offsets[l - 1] + i, post: offsets[l] + j, code: codes[j * n_pre + i], fault: None });
            }
        }
    }

    let n_pre = spec.layers[last - 1];
    if last > 1 {
        let hidden_net = ModelGraph {
            lif: lif.clone(),
            layer_scales: scales[..last].to_vec(),
            neurons: neurons[..offsets[last]].to_vec(),
            edges: edges.clone(),
            outputs: (offsets[last - 1]..offsets[last]).collect(),
        };
        activity = measured_rates(&hidden_net, &train, &spec.engine, rng::derive(spec.seed, 50))?;
    }
    let weights = train_readout(&activity, &train, n_pre, classes, pr0, lif);
    let (codes, scale) = quantize_readout(&weights, &activity, &train, n_pre, classes, pr0, lif);
    scales[last] = scale;
    for k in 0..classes {
        for i in 0..n_pre {
            edges.push(Edge { pre: offsets[last - 1] + i, post: offsets[last] + k, code: codes[k * n_pre + i], fault: None });
        }
    }

    let model = ModelGraph {
        lif: lif.clone(),
        layer_scales: scales,
        neurons,
        edges,
        outputs: (offsets[last]..offsets[last] + classes).collect(),
    };
    model.validate()?;
    let baseline_accuracy = accuracy(&model, &eval, &spec.engine, &ToyModel::baseline_seeds(spec))?;
    Ok(ToyModel { model, train, eval, baseline_accuracy })
}

/// Spiking rates (Hz) of `model`'s output neurons per sample.
fn measured_rates(model: &ModelGraph, data: &Dataset, cfg: &EngineConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    let net = Network::new(model)?;
    let transmit = net.uniform_transmit(cfg.pr0);
    data.samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = net.run(s, &transmit, cfg, seed, i as u64)?;
            Ok(model.outputs.iter().map(|&o| f64::from(r.counts[o]) / cfg.duration).collect())
        })
        .collect()
}

fn blob_centroids<R: Rng>(rng: &mut R, classes: usize, dim: usize) -> Vec<Vec<f64>> {
    let min_sep = 0.45 * (dim as f64).sqrt().min(1.5);
    let mut best: Vec<Vec<f64>> = Vec::new();
    let mut best_sep = -1.0;
    for _ in 0..200 {
        let cand: Vec<Vec<f64>> = (0..classes).map(|_| (0..dim).map(|_| rng.random_range(0.15..0.85)).collect()).collect();
        let mut sep = f64::INFINITY;
        for a in 0..classes {
            for b in a + 1..classes {
                let d: f64 = cand[a].iter().zip(&cand[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                sep = sep.min(d);
            }
        }
        if sep > best_sep {
            best_sep = sep;
            best = cand;
        }
        if best_sep >= min_sep {
            break;
        }
    }
    best
}

/// Scale that puts the upper quartile of positive drive at three times rheobase.
fn hidden_scale(unit_drive: &mut [f64], lif: &LifParams) -> f64 {
    let mut pos: Vec<f64> = unit_drive.iter().copied().filter(|&d| d > 0.0).collect();
    if pos.is_empty() {
        return 1.0;
    }
    pos.sort_by(f64::total_cmp);
    let q = pos[(pos.len() * 3) / 4];
    let rheobase = (lif.v_threshold - lif.v_reset) / lif.leak_tau;
    3.0 * rheobase / q
}

/// Normalized least-mean-squares on output drive.
fn train_readout(
    activity: &[Vec<f64>],
    data: &Dataset,
    n_pre: usize,
    classes: usize,
    pr0: f64,
    lif: &LifParams,
) -> Vec<f64> {
    let rheobase = (lif.v_threshold - lif.v_reset) / lif.leak_tau;
    let hi = 2.0 * rheobase;
    let mut w = vec![0.0; classes * n_pre];
    for _ in 0..100 {
        for (a, s) in activity.iter().zip(&data.samples) {
            let x: Vec<f64> = a.iter().map(|&h| pr0 * h).collect();
            let norm: f64 = x.iter().map(|v| v * v).sum::<f64>() + 1e-9;
            for k in 0..classes {
                let mu: f64 = (0..n_pre).map(|i| w[k * n_pre + i] * x[i]).sum();
                let target = if s.label == k { hi } else { 0.0 };
                let g = 0.1 * (target - mu) / norm;
                for i in 0..n_pre {
                    w[k * n_pre + i] += g * x[i];
                }
            }
        }
    }
    w
}

#[allow(clippy::too_many_arguments)]
fn rate_model_score(
    codes: &[i8],
    scale: f64,
    activity: &[Vec<f64>],
    data: &Dataset,
    n_pre: usize,
    classes: usize,
    pr0: f64,
    lif: &LifParams,
) -> (usize, f64) {
    let mut correct = 0;
    let mut margin = 0.0;
    for (a, s) in activity.iter().zip(&data.samples) {
        let rates: Vec<f64> = (0..classes)
            .map(|k| lif.rate(scale * (0..n_pre).map(|i| f64::from(codes[k * n_pre + i]) * pr0 * a[i]).sum::<f64>()))
            .collect();
        let mut best = 0;
        for k in 1..classes {
            if rates[k] > rates[best] {
                best = k;
            }
        }
        if best == s.label {
            correct += 1;
        }
        let other = (0..classes).filter(|&k| k != s.label).map(|k| rates[k]).fold(0.0, f64::max);
        margin += rates[s.label] - other;
    }
    (correct, margin)
}

/// Round to the 2-bit grid, searching the scale that keeps rate-model accuracy highest.
fn quantize_readout(
    w: &[f64],
    activity: &[Vec<f64>],
    data: &Dataset,
    n_pre: usize,
    classes: usize,
    pr0: f64,
    lif: &LifParams,
) -> (Vec<i8>, f64) {
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut best: Option<((usize, f64), Vec<i8>, f64)> = None;
    for step in 0..48 {
        let scale = wmax * 2f64.powf(-(step as f64) / 8.0);
        let codes: Vec<i8> = w.iter().map(|&v| (v / scale).round().clamp(-2.0, 1.0) as i8).collect();
        let score = rate_model_score(&codes, scale, activity, data, n_pre, classes, pr0, lif);
        let better = match &best {
            None => true,
            Some((s, _, _)) => score.0 > s.0 || (score.0 == s.0 && score.1 > s.1),
        };
        if better {
            best = Some((score, codes, scale));
        }
    }
    let (_, codes, scale) = best.expect("at least one candidate");
    (codes, scale)
}
