//! Experiment scenarios shared by the command-line runners and the acceptance suite.

use rand::Rng;

use crate::astro::{
    poisson_train, simulate, step, AstroParams, AstroState, AstroTrace, Feedback, FaultSchedule, Integrator, SimOptions,
    SiteReadout, SpikeTrain,
};
use crate::config::{ExperimentConfig, SelfRepairConfig};
use crate::costmodel::{design_area, design_power, normalize, power_savings_disable, CostRow, Technique, PUBLISHED_AREA};
use crate::error::{param, Result};
use crate::fixed::{simulate_fixed, FxAstroParams, PwlApprox};
use crate::netmap::{cluster_count_estimate, partition, CoreSpec, EVALUATED_MODELS};
use crate::reliability::{overall_mttf, p_failures, sofr, FailureRates, ReliabilityRow};
use crate::rng;
use crate::snn::{
    accuracy, attach_astrocytes, build_toy_model, inject_faults, Dataset, Edge, EngineConfig, FaultKind, FaultSpec, LifParams,
    ModelGraph, Neuron, Sample, ToyModel,
};
use crate::synthesis::{evaluate_min_accuracy, insert_astrocytes, split_groups, AstroEnabledModel, ModelContext, SynthesisConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub model: &'static str,
    pub params: u64,
    pub ubrain: u64,
    pub crossbar: u64,
    pub expected_ubrain: u64,
    pub expected_crossbar: u64,
}

impl ClusterRow {
    pub fn matches(&self) -> usize {
        usize::from(self.ubrain == self.expected_ubrain) + usize::from(self.crossbar == self.expected_crossbar)
    }
}

pub fn cluster_table(ubrain: &CoreSpec, crossbar: &CoreSpec) -> Vec<ClusterRow> {
    EVALUATED_MODELS
        .iter()
        .map(|m| ClusterRow {
            model: m.name,
            params: m.params,
            ubrain: cluster_count_estimate(m.params, ubrain),
            crossbar: cluster_count_estimate(m.params, crossbar),
            expected_ubrain: m.clusters_ubrain,
            expected_crossbar: m.clusters_crossbar,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identity {
    pub label: &'static str,
    pub value: usize,
    pub expected: usize,
}

pub fn capacity_identities(ubrain: &CoreSpec, crossbar: &CoreSpec) -> Vec<Identity> {
    vec![
        Identity { label: "ubrain synapses", value: ubrain.syn_cap, expected: 17_408 },
        Identity { label: "crossbar synapses", value: crossbar.syn_cap, expected: 16_384 },
        Identity { label: "ubrain neurons", value: ubrain.neuron_cap, expected: 336 },
        Identity { label: "ubrain astrocytes", value: ubrain.max_astrocytes, expected: 6 },
        Identity { label: "crossbar astrocytes", value: crossbar.max_astrocytes, expected: 4 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeRow {
    pub variable: &'static str,
    pub tau: f64,
    /// Max deviation from the closed form at `dt`.
    pub error: f64,
    /// Same at `dt/2`.
    pub error_half: f64,
}

impl OdeRow {
    pub fn ratio(&self) -> f64 {
        self.error / self.error_half
    }
}

fn decay_error(params: &AstroParams, variable: &str, tau: f64, duration: f64) -> Result<f64> {
    let mut s = AstroState::rest(params);
    match variable {
        "ag" => s.ag = 1.0,
        "glu" => s.glu = 1.0,
        _ => s.esp = 1.0,
    }
    let steps = (duration / params.dt).round() as usize;
    let mut worst = 0.0f64;
    for k in 1..=steps {
        s = step(&s, params, 0)?;
        let v = match variable {
            "ag" => s.ag,
            "glu" => s.glu,
            _ => s.esp,
        };
        worst = worst.max((v - (-(k as f64) * params.dt / tau).exp()).abs());
    }
    Ok(worst)
}

/// Unit-amplitude decay of AG, Glu and eSP with no input, against `e^(-t/τ)`.
pub fn ode_fidelity(params: &AstroParams, duration: f64) -> Result<Vec<OdeRow>> {
    params.validate()?;
    let half = AstroParams { dt: params.dt / 2.0, ..params.clone() };
    [("ag", params.tau_ag), ("glu", params.tau_glu), ("esp", params.tau_esp)]
        .into_iter()
        .map(|(v, tau)| {
            Ok(OdeRow {
                variable: v,
                tau,
                error: decay_error(params, v, tau, duration)?,
                error_half: decay_error(&half, v, tau, duration)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfRepairRun {
    pub seed: u64,
    pub baseline_hz: f64,
    pub unrepaired_hz: f64,
    pub repaired_hz: f64,
}

#[derive(Debug, Clone)]
pub struct SelfRepairReport {
    pub runs: Vec<SelfRepairRun>,
    /// Astrocyte-enabled trace of the first seed.
    pub trace: AstroTrace,
    /// Same inputs with PR frozen at `pr0`.
    pub frozen: AstroTrace,
}

impl SelfRepairReport {
    fn mean(&self, f: impl Fn(&SelfRepairRun) -> f64) -> f64 {
        self.runs.iter().map(f).sum::<f64>() / self.runs.len() as f64
    }
    pub fn baseline(&self) -> f64 {
        self.mean(|r| r.baseline_hz)
    }
    pub fn unrepaired(&self) -> f64 {
        self.mean(|r| r.unrepaired_hz)
    }
    pub fn repaired(&self) -> f64 {
        self.mean(|r| r.repaired_hz)
    }
}

fn self_repair_inputs(cfg: &SelfRepairConfig, seed: u64) -> Result<(Vec<SpikeTrain>, FaultSchedule)> {
    let sources = (0..cfg.sources)
        .map(|s| poisson_train(cfg.rate_hz, cfg.duration, rng::derive(seed, 10 + s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let faults = FaultSchedule::cut_from(0, cfg.fault_time)?;
    Ok((sources, faults))
}

fn self_repair_options(astro: &AstroParams, cfg: &SelfRepairConfig, seed: u64, sample_every: usize) -> SimOptions {
    let mut opts = SimOptions::new(cfg.duration, sample_every, rng::derive(seed, 1));
    opts.readout = SiteReadout::Neuron(cfg.site.clone());
    opts.initial = Some(AstroState::equilibrium(astro, cfg.rate_hz * cfg.sources as f64));
    opts
}

pub fn self_repair_run(astro: &AstroParams, cfg: &SelfRepairConfig, seed: u64) -> Result<(SelfRepairRun, AstroTrace, AstroTrace)> {
    let (sources, faults) = self_repair_inputs(cfg, seed)?;
    let opts = self_repair_options(astro, cfg, seed, cfg.sample_every);
    let live = simulate(astro, &sources, &faults, &opts)?;
    let frozen = simulate(astro, &sources, &faults, &SimOptions { feedback: Feedback::Frozen, ..opts })?;
    let run = SelfRepairRun {
        seed,
        baseline_hz: live.rate_between(cfg.fault_time / 2.0, cfg.fault_time)?,
        unrepaired_hz: frozen.rate_between(cfg.fault_time, cfg.duration)?,
        repaired_hz: live.rate_between(cfg.fault_time, cfg.duration)?,
    };
    Ok((run, live, frozen))
}

/// The error-recovery scenario over `cfg.seeds` seeds derived from `seed`.
pub fn self_repair(astro: &AstroParams, cfg: &SelfRepairConfig, seed: u64) -> Result<SelfRepairReport> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let mut first = None;
    for k in 0..cfg.seeds {
        let (run, live, frozen) = self_repair_run(astro, cfg, rng::derive(seed, k))?;
        runs.push(run);
        if first.is_none() {
            first = Some((live, frozen));
        }
    }
    let (trace, frozen) = first.expect("at least one seed");
    Ok(SelfRepairReport { runs, trace, frozen })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwlRow {
    pub segments: usize,
    /// Max error of the `e^-x` table on [0, 10].
    pub exp_error: f64,
    /// Sup-norm PR deviation against the float exponential integrator.
    pub pr_dev: f64,
    /// Same against forward Euler.
    pub pr_dev_euler: f64,
    pub saturated: bool,
}

fn pr_sup(a: &AstroTrace, b: &AstroTrace) -> f64 {
    a.samples.iter().zip(&b.samples).map(|(x, y)| (x.state.pr - y.state.pr).abs()).fold(0.0, f64::max)
}

/// Fixed-point against float PR traces over the error-recovery scenario.
pub fn pwl_comparison(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<PwlRow>> {
    let exact = AstroParams { integrator: Integrator::Exponential, ..cfg.astro.clone() };
    let euler = AstroParams { integrator: Integrator::Euler, ..cfg.astro.clone() };
    let sr = &cfg.selfrepair;
    let mut refs = Vec::new();
    for k in 0..cfg.pwl.seeds {
        let s = rng::derive(seed, k);
        let (sources, faults) = self_repair_inputs(sr, s)?;
        let opts = self_repair_options(&exact, sr, s, 1);
        let a = simulate(&exact, &sources, &faults, &opts)?;
        let b = simulate(&euler, &sources, &faults, &opts)?;
        refs.push((sources, faults, opts, a, b));
    }
    let mut rows = Vec::new();
    for &segments in &cfg.pwl.segments {
        let table = PwlApprox::build(|x| (-x).exp(), (0.0, 10.0), segments, cfg.pwl.placement)?;
        let fx = FxAstroParams::new(&exact, segments, cfg.pwl.placement)?;
        let mut row = PwlRow { segments, exp_error: table.max_error(|x| (-x).exp(), 10_000)?, pr_dev: 0.0, pr_dev_euler: 0.0, saturated: false };
        for (sources, faults, opts, a, b) in &refs {
            let f = simulate_fixed(&fx, sources, faults, opts)?;
            row.pr_dev = row.pr_dev.max(pr_sup(a, &f));
            row.pr_dev_euler = row.pr_dev_euler.max(pr_sup(b, &f));
            row.saturated |= f.saturated;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Worst `|decode(encode(x)) - x|` over in-range draws and a few edge values.
pub fn round_trip_error(seed: u64) -> f64 {
    let limit = crate::fixed::decode(crate::fixed::Fixed::MAX);
    let mut g = rng::seeded(seed);
    let edge = [0.0, 1.0, -1.0, limit, -limit, crate::fixed::FixedFormat::resolution() / 2.0];
    edge.into_iter()
        .chain((0..100_000).map(|_| g.random_range(-limit..limit)))
        .map(|x| (crate::fixed::decode(crate::fixed::encode(x).expect("finite")) - x).abs())
        .fold(0.0, f64::max)
}

/// Failure rates of the configured device scaled to each model's core count.
pub fn reliability_rows(cfg: &ExperimentConfig) -> Result<Vec<ReliabilityRow>> {
    let base = cfg.reliability.rates()?;
    let rep = &cfg.reliability_report;
    let mut rows = Vec::new();
    let mut push = |name: &str, cores: u64| -> Result<()> {
        let k = cores as f64;
        let rates = FailureRates {
            lambda_aging: base.lambda_aging * k,
            lambda_endurance: base.lambda_endurance * k,
            lambda_disturb: base.lambda_disturb * k,
        };
        let lambda = sofr(&rates)?;
        let p = (0..=rep.max_n).map(|n| p_failures(lambda, rep.interval_hours, n)).collect::<Result<Vec<_>>>()?;
        rows.push(ReliabilityRow { model: name.to_string(), rates, lambda_overall: lambda, mttf: overall_mttf(&rates)?, p });
        Ok(())
    };
    push("core", 1)?;
    for m in EVALUATED_MODELS {
        push(m.name, cluster_count_estimate(m.params, &cfg.cores.ubrain))?;
    }
    Ok(rows)
}

/// Area of every model and technique, normalized to μBrain replication of the first model.
pub fn area_rows(cfg: &ExperimentConfig) -> Result<Vec<CostRow>> {
    let (ub, xb) = (&cfg.cores.ubrain, &cfg.cores.crossbar);
    let first = &EVALUATED_MODELS[0];
    let baseline = design_area(cluster_count_estimate(first.params, ub), Technique::Replication, ub, &cfg.area, 0)?;
    let mut rows = Vec::new();
    for m in EVALUATED_MODELS {
        for core in [ub, xb] {
            let clusters = cluster_count_estimate(m.params, core);
            for t in [Technique::Replication, Technique::Redundant, Technique::Proposed] {
                if t == Technique::Redundant && core.kind != crate::netmap::CoreKind::Crossbar {
                    continue;
                }
                let value = design_area(clusters, t, core, &cfg.area, clusters * core.max_astrocytes as u64)?;
                rows.push(CostRow { model: m.name.to_string(), technique: t, core: core.kind, value, normalized: normalize(&[value], baseline)?[0] });
            }
        }
    }
    Ok(rows)
}

/// Published normalized area for a row of [`area_rows`], where one exists.
pub fn published_area(row: &CostRow) -> Option<f64> {
    use crate::netmap::CoreKind::*;
    let col = match (row.technique, row.core) {
        (Technique::Replication, Ubrain) => 0,
        (Technique::Replication, Crossbar) => 1,
        (Technique::Redundant, Crossbar) => 2,
        (Technique::Proposed, Ubrain) => 5,
        (Technique::Proposed, Crossbar) => 6,
        _ => return None,
    };
    PUBLISHED_AREA.iter().find(|(n, _)| *n == row.model).map(|(_, v)| v[col])
}

/// Power of every model and technique at uniform activity, normalized like the area table.
pub fn power_rows(cfg: &ExperimentConfig) -> Result<Vec<CostRow>> {
    let (ub, xb) = (&cfg.cores.ubrain, &cfg.cores.crossbar);
    let pm = &cfg.power.model;
    let act = cfg.power.activity;
    let first = cluster_count_estimate(EVALUATED_MODELS[0].params, ub) as usize;
    let baseline = design_power(&vec![act; first], Technique::Replication, ub, pm, 0)?;
    let mut rows = Vec::new();
    for m in EVALUATED_MODELS {
        for core in [ub, xb] {
            let clusters = cluster_count_estimate(m.params, core);
            let activity = vec![act; clusters as usize];
            for t in [Technique::Replication, Technique::Redundant, Technique::Proposed] {
                if t == Technique::Redundant && core.kind != crate::netmap::CoreKind::Crossbar {
                    continue;
                }
                let value = design_power(&activity, t, core, pm, clusters * core.max_astrocytes as u64)?;
                rows.push(CostRow { model: m.name.to_string(), technique: t, core: core.kind, value, normalized: normalize(&[value], baseline)?[0] });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisableRow {
    pub core: crate::netmap::CoreKind,
    pub used: usize,
    pub savings_w: f64,
    pub fraction: f64,
}

/// Savings on one core as its astrocyte usage goes from none to all.
pub fn disable_rows(cfg: &ExperimentConfig) -> Result<Vec<DisableRow>> {
    let mut rows = Vec::new();
    for core in [&cfg.cores.ubrain, &cfg.cores.crossbar] {
        for used in 0..=core.max_astrocytes {
            let (savings_w, fraction) = power_savings_disable(&[core.max_astrocytes - used], &[cfg.power.activity], core, &cfg.power.model)?;
            rows.push(DisableRow { core: core.kind, used, savings_w, fraction });
        }
    }
    Ok(rows)
}

/// Two classes, each carried by three inputs onto one output whose firing needs all
/// three. Losing any one synapse silences the output for part of its class.
pub fn fragile_model(seed: u64) -> (ModelGraph, Dataset) {
    let lif = LifParams { leak_tau: 0.05, ..LifParams::default() };
    let mut neurons = vec![Neuron { layer: 0, fault: None }; 6];
    neurons.extend(vec![Neuron { layer: 1, fault: None }; 2]);
    let edges = (0..6).map(|i| Edge { pre: i, post: 6 + i / 3, code: 1, fault: None }).collect();
    let model = ModelGraph { lif, layer_scales: vec![1.0, 0.09], neurons, edges, outputs: vec![6, 7] };
    let mut r = rng::seeded(seed);
    let samples = (0..40)
        .map(|i| {
            let label = i % 2;
            let rates = (0..6)
                .map(|k| {
                    let base = if k / 3 == label { 150.0 } else { 10.0 };
                    base * r.random_range(0.9..1.1)
                })
                .collect();
            Sample { rates, label }
        })
        .collect();
    (model, Dataset { classes: 2, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragileReport {
    pub baseline: f64,
    /// Mean a_min over seeds with no astrocyte.
    pub before: f64,
    /// Mean a_min over seeds with one astrocyte per output.
    pub after: f64,
}

/// Paired a_min on the fragile model's output layer, with and without astrocytes.
pub fn fragile_repair(cfg: &ExperimentConfig, seed: u64, seeds: u64) -> Result<FragileReport> {
    let (model, data) = fragile_model(0);
    let engine = EngineConfig::default();
    let ctx = ModelContext { model: &model, data: &data, astro: &cfg.astro, engine: &engine, coupling: &cfg.coupling };
    let outputs = model.outputs.clone();
    let kinds = [FaultKind::SynapseStuckZero];
    let (mut before, mut after, mut base) = (0.0, 0.0, 0.0);
    for k in 0..seeds {
        let sc = SynthesisConfig { seed: rng::derive(seed, k), ..Default::default() };
        let eval = sc.seeds();
        base += accuracy(&model, &data, &engine, &eval)?;
        before += evaluate_min_accuracy(&ctx, 0, 1, &outputs, &[], 20, &kinds, sc.seed, &eval)?;
        after += evaluate_min_accuracy(&ctx, 0, 1, &outputs, &split_groups(&outputs, 2), 20, &kinds, sc.seed, &eval)?;
    }
    let n = seeds as f64;
    Ok(FragileReport { baseline: base / n, before: before / n, after: after / n })
}

/// Run the insertion loop on the fragile model with `synthesis` settings.
pub fn synthesize_fragile(cfg: &ExperimentConfig, synthesis: &SynthesisConfig) -> Result<AstroEnabledModel> {
    let (model, data) = fragile_model(0);
    let engine = EngineConfig::default();
    let ctx = ModelContext { model: &model, data: &data, astro: &cfg.astro, engine: &engine, coupling: &cfg.coupling };
    let core = &cfg.cores.ubrain;
    let mapping = partition(&model, core)?;
    insert_astrocytes(&ctx, &mapping, synthesis, core)
}

/// Build the configured toy model and run the insertion loop on it.
pub fn synthesize_toy(cfg: &ExperimentConfig, synthesis: &SynthesisConfig) -> Result<(ToyModel, AstroEnabledModel)> {
    let toy = build_toy_model(&cfg.toy)?;
    let ctx = ModelContext { model: &toy.model, data: &toy.eval, astro: &cfg.astro, engine: &cfg.toy.engine, coupling: &cfg.coupling };
    let core = &cfg.cores.ubrain;
    let mapping = partition(&toy.model, core)?;
    let enabled = insert_astrocytes(&ctx, &mapping, synthesis, core)?;
    Ok((toy, enabled))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate: f64,
    pub seed: u64,
    pub without: f64,
    pub with: f64,
}

#[derive(Debug, Clone)]
pub struct FaultSweep {
    pub baseline: f64,
    pub enabled: AstroEnabledModel,
    pub rows: Vec<SweepRow>,
}

impl FaultSweep {
    /// Mean accuracy at `rate`, with or without astrocytes.
    pub fn mean(&self, rate: f64, with: bool) -> f64 {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.rate == rate).map(|r| if with { r.with } else { r.without }).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
}

/// Accuracy of the toy model under injected faults, with astrocytes inserted at
/// `a_th = a_o` and without.
pub fn fault_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<FaultSweep> {
    let f = &cfg.faults;
    let synthesis = SynthesisConfig { a_th: None, preset: f.preset, kinds: f.kinds.clone(), n_r: f.n_r, seed, ..cfg.synthesis.clone() };
    let (toy, enabled) = synthesize_toy(cfg, &synthesis)?;
    let engine = &cfg.toy.engine;
    let ctx = attach_astrocytes(&toy.model, &enabled.allocation, &cfg.astro, engine, &cfg.coupling, &toy.eval)?;
    let eval_seeds = ToyModel::baseline_seeds(&cfg.toy);
    let mut rows = Vec::new();
    for &rate in &f.rates {
        for k in 0..f.seeds {
            let spec = FaultSpec::new(rate, &f.kinds, rng::derive(seed, 300 + k));
            let faulted = inject_faults(&toy.model, &spec)?;
            rows.push(SweepRow {
                rate,
                seed: k,
                without: accuracy(&faulted, &toy.eval, engine, &eval_seeds)?,
                with: ctx.accuracy(&faulted, &toy.eval, &eval_seeds)?,
            });
        }
    }
    if rows.is_empty() {
        return Err(param("faults", "no sweep points"));
    }
    Ok(FaultSweep { baseline: toy.baseline_accuracy, enabled, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_cluster_entries_match() {
        let c = ExperimentConfig::default();
        let rows = cluster_table(&c.cores.ubrain, &c.cores.crossbar);
        assert_eq!(rows.iter().map(ClusterRow::matches).sum::<usize>(), 14);
    }

    #[test]
    fn identities_hold() {
        let c = ExperimentConfig::default();
        assert!(capacity_identities(&c.cores.ubrain, &c.cores.crossbar).iter().all(|i| i.value == i.expected));
    }

    #[test]
    fn euler_decay_errors_halve() {
        let rows = ode_fidelity(&AstroParams::default(), 20.0).unwrap();
        for r in &rows {
            assert!((r.ratio() - 2.0).abs() < 0.05, "{} {}", r.variable, r.ratio());
        }
        // First-order bound x/(2e) at x = dt/τ.
        let glu = &rows[1];
        assert!((glu.error - 0.01 / (2.0 * std::f64::consts::E)).abs() < 1e-4);
    }

    #[test]
    fn published_area_lookup() {
        let c = ExperimentConfig::default();
        let rows = area_rows(&c).unwrap();
        let first = &rows[0];
        assert_eq!(published_area(first), Some(1.0));
        assert!((first.normalized - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fragile_model_is_valid_and_accurate() {
        let (m, d) = fragile_model(0);
        m.validate().unwrap();
        let acc = accuracy(&m, &d, &EngineConfig::default(), &[1, 2]).unwrap();
        assert!(acc > 0.9, "{acc}");
    }
}
