//! Experiment runners behind the `astrorepair` subcommands. Each runner builds all
//! of its outputs in memory and writes them only once the whole run succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::config::ExperimentConfig;
use crate::costmodel::{write_cost_csv, CostRow, Technique};
use crate::error::Result;
use crate::netmap::{partition, validate, CoreKind};
use crate::netmap::{cluster_count_estimate, EVALUATED_MODELS};
use crate::reliability::{mttf_disturb, overall_mttf, p_failures, self_heating_temp, write_report_csv, DisturbParams, EnduranceParams, FailureRates};
use crate::rng;
use rand::Rng;
use crate::scenarios::*;
use crate::snn::build_toy_model;
use crate::svg::{bar_chart, line_chart, Series};
use crate::synthesis::SynthesisConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Selfrepair,
    Clusters,
    Synthesize,
    Faults,
    Reliability,
    Area,
    Power,
    Pwl,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Selfrepair,
        Command::Clusters,
        Command::Synthesize,
        Command::Faults,
        Command::Reliability,
        Command::Area,
        Command::Power,
        Command::Pwl,
    ];
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// `(file name, contents)` in write order.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl Report {
    fn add(&mut self, name: &str, text: String) {
        self.artifacts.push((name.to_string(), text.into_bytes()));
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), pass, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }

    pub fn artifact(&self, name: &str) -> Option<&[u8]> {
        self.artifacts.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Write every artifact plus `summary.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, bytes) in self.artifacts.iter().map(|(n, b)| (n.as_str(), b.as_slice())).chain([("summary.txt", self.summary().as_bytes())]) {
            let p = dir.join(name);
            std::fs::write(&p, bytes)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn utf8(buf: Vec<u8>) -> String {
    String::from_utf8(buf).expect("writers emit UTF-8")
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, seed: u64, svg: bool) -> Result<Report> {
    cfg.validate()?;
    let mut r = Report::default();
    match cmd {
        Command::Selfrepair => selfrepair(cfg, seed, svg, &mut r)?,
        Command::Clusters => clusters(cfg, &mut r)?,
        Command::Synthesize => synthesize(cfg, seed, &mut r)?,
        Command::Faults => faults(cfg, seed, svg, &mut r)?,
        Command::Reliability => reliability(cfg, seed, &mut r)?,
        Command::Area => area(cfg, svg, &mut r)?,
        Command::Power => power(cfg, svg, &mut r)?,
        Command::Pwl => pwl(cfg, seed, &mut r)?,
    }
    Ok(r)
}

fn selfrepair(cfg: &ExperimentConfig, seed: u64, svg: bool, r: &mut Report) -> Result<()> {
    let rep = self_repair(&cfg.astro, &cfg.selfrepair, seed)?;
    let mut s = String::from("seed,baseline_hz,unrepaired_hz,repaired_hz\n");
    for run in &rep.runs {
        let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", run.seed, run.baseline_hz, run.unrepaired_hz, run.repaired_hz);
    }
    r.add("selfrepair_runs.csv", s);
    let mut buf = Vec::new();
    rep.trace.write_csv(&mut buf)?;
    r.add("selfrepair_trace.csv", utf8(buf));
    let mut buf = Vec::new();
    rep.frozen.write_csv(&mut buf)?;
    r.add("selfrepair_frozen.csv", utf8(buf));
    if svg {
        let pts = |t: &crate::astro::AstroTrace, f: fn(&crate::astro::TraceSample) -> f64| {
            t.samples.iter().map(|x| (x.state.time, f(x))).collect::<Vec<_>>()
        };
        r.add(
            "selfrepair_pr.svg",
            line_chart("Release probability", "time (s)", "PR", &[
                Series { label: "astrocyte", points: pts(&rep.trace, |x| x.state.pr) },
                Series { label: "frozen", points: pts(&rep.frozen, |x| x.state.pr) },
            ]),
        );
        r.add(
            "selfrepair_rate.svg",
            line_chart("Output rate", "time (s)", "Hz", &[
                Series { label: "astrocyte", points: pts(&rep.trace, |x| x.out_rate_hz) },
                Series { label: "frozen", points: pts(&rep.frozen, |x| x.out_rate_hz) },
            ]),
        );
    }
    let ode = ode_fidelity(&cfg.astro, cfg.selfrepair.duration)?;
    let mut s = String::from("variable,tau,error,error_half,ratio\n");
    for o in &ode {
        let _ = writeln!(s, "{},{},{:.6e},{:.6e},{:.4}", o.variable, o.tau, o.error, o.error_half, o.ratio());
    }
    r.add("ode_fidelity.csv", s);
    for o in &ode {
        r.check(&format!("3 ode {} error", o.variable), o.error <= 1e-4, format!("{:.3e} at dt {}", o.error, cfg.astro.dt));
        r.check(&format!("3 ode {} order", o.variable), (o.ratio() - 2.0).abs() < 0.1, format!("error ratio {:.4}", o.ratio()));
    }
    let (b, u, p) = (rep.baseline(), rep.unrepaired(), rep.repaired());
    r.check("4 unrepaired collapse", u < 0.05 * b, format!("unrepaired {u:.4} Hz vs baseline {b:.4} Hz"));
    r.check("4 repaired recovery", p > u && p >= 0.4 * b, format!("repaired {p:.4} Hz ({:.1}% of baseline)", 100.0 * p / b));
    Ok(())
}

fn clusters(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let rows = cluster_table(&cfg.cores.ubrain, &cfg.cores.crossbar);
    let mut s = String::from("model,params,ubrain,crossbar,expected_ubrain,expected_crossbar\n");
    for row in &rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", row.model, row.params, row.ubrain, row.crossbar, row.expected_ubrain, row.expected_crossbar);
    }
    r.add("clusters.csv", s);
    let toy = build_toy_model(&cfg.toy)?;
    let mapping = partition(&toy.model, &cfg.cores.ubrain)?;
    let violations = validate(&mapping, &cfg.cores.ubrain, &toy.model);
    r.add("toy_mapping.json", mapping.to_json()?);
    let hits: usize = rows.iter().map(ClusterRow::matches).sum();
    r.check("1 cluster counts", hits == 2 * rows.len(), format!("{hits}/{} entries match", 2 * rows.len()));
    let ids = capacity_identities(&cfg.cores.ubrain, &cfg.cores.crossbar);
    let bad: Vec<_> = ids.iter().filter(|i| i.value != i.expected).map(|i| format!("{} = {}", i.label, i.value)).collect();
    r.check("2 capacity identities", bad.is_empty(), if bad.is_empty() { "all hold".into() } else { bad.join("; ") });
    r.check("toy mapping", violations.is_empty(), format!("{} clusters, {} violations", mapping.clusters.len(), violations.len()));
    Ok(())
}

fn synthesize(cfg: &ExperimentConfig, seed: u64, r: &mut Report) -> Result<()> {
    let sc = SynthesisConfig { seed, ..cfg.synthesis.clone() };
    let (toy, enabled) = synthesize_toy(cfg, &sc)?;
    r.add("astro_model.json", enabled.to_json()?);
    let mut buf = Vec::new();
    enabled.write_log_csv(&mut buf)?;
    r.add("synthesis_log.csv", utf8(buf));
    let core = &cfg.cores.ubrain;
    let ok = enabled.allocation.validate().is_ok();
    r.check("allocation", ok, format!("{} astrocytes, baseline accuracy {:.4}", enabled.allocation.total(), toy.baseline_accuracy));
    let over = enabled.allocation.used_per_cluster(enabled.mapping.clusters.len()).iter().filter(|&&u| u > core.max_astrocytes).count();
    r.check("platform capacity", over == 0, format!("{over} clusters over {} astrocytes", core.max_astrocytes));

    let stuck = vec![crate::snn::FaultKind::SynapseStuckZero];
    let fragile = |a_th| synthesize_fragile(cfg, &SynthesisConfig { a_th, kinds: stuck.clone(), seed, ..cfg.synthesis.clone() });
    let full = fragile(Some(1.0))?;
    let bounded = full.allocation.clusters.iter().flat_map(|c| &c.layers).all(|l| {
        let cap = cfg.synthesis.layer_cap(&cfg.cores.ubrain, l.neurons.len());
        l.groups.len() <= cap && l.history.len() <= cap + 1
    });
    r.check("7 termination", bounded, "insertions stay within the per-layer cap".into());
    let none = fragile(Some(0.0))?;
    r.check("7 zero threshold", none.allocation.total() == 0, format!("{} astrocytes at a_th = 0", none.allocation.total()));
    let even = full.allocation.clusters.iter().flat_map(|c| &c.layers).all(|l| {
        let sizes: Vec<usize> = l.groups.iter().map(Vec::len).collect();
        sizes.iter().max().zip(sizes.iter().min()).is_none_or(|(a, b)| a - b <= 1)
    });
    r.check("7 group sizes", even && full.allocation.validate().is_ok(), "sizes differ by at most one".into());
    let f = fragile_repair(cfg, seed, 10)?;
    r.check("7 fragile improvement", f.after > f.before, format!("mean a_min {:.4} -> {:.4}", f.before, f.after));
    Ok(())
}

fn faults(cfg: &ExperimentConfig, seed: u64, svg: bool, r: &mut Report) -> Result<()> {
    let sweep = fault_sweep(cfg, seed)?;
    let mut s = String::from("rate,seed,without,with\n");
    for row in &sweep.rows {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", row.rate, row.seed, row.without, row.with);
    }
    r.add("faults.csv", s);
    r.add("faults_model.json", sweep.enabled.to_json()?);
    let rates = &cfg.faults.rates;
    if svg {
        let cats: Vec<String> = rates.iter().map(|x| format!("{:.0}%", 100.0 * x)).collect();
        let without: Vec<f64> = rates.iter().map(|&x| sweep.mean(x, false)).collect();
        let with: Vec<f64> = rates.iter().map(|&x| sweep.mean(x, true)).collect();
        r.add("faults.svg", bar_chart("Accuracy under faults", "accuracy", &cats, &[("without", without), ("with", with)]));
    }
    let a_o = sweep.baseline;
    let lowest = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let m = sweep.mean(lowest, true);
    r.check("8 bounded loss", m >= a_o - 0.01, format!("{m:.4} at {:.0}% vs a_o {a_o:.4}", 100.0 * lowest));
    let mut sorted = rates.clone();
    sorted.sort_by(f64::total_cmp);
    let means: Vec<f64> = sorted.iter().map(|&x| sweep.mean(x, true)).collect();
    r.check("8 monotone", means.windows(2).all(|w| w[1] <= w[0]), format!("{means:.4?}"));
    Ok(())
}

fn reliability(cfg: &ExperimentConfig, seed: u64, r: &mut Report) -> Result<()> {
    let rows = reliability_rows(cfg)?;
    let mut buf = Vec::new();
    write_report_csv(&rows, &mut buf)?;
    r.add("reliability.csv", utf8(buf));
    let core = &rows[0];
    let lt = core.lambda_overall * cfg.reliability_report.interval_hours;
    r.check("5 P0", core.p[0] == (-lt).exp(), format!("P0 = {:.6e} at lambda*T = {lt:.4}", core.p[0]));
    let mut worst = 0.0f64;
    for k in 0..=100 {
        let mu = 0.1 * k as f64;
        let total = (0..=200).map(|n| p_failures(mu, 1.0, n)).sum::<Result<f64>>()?;
        worst = worst.max((total - 1.0).abs());
    }
    r.check("5 P sums to one", worst <= 1e-9, format!("max |sum - 1| = {worst:.2e} for lambda*T in [0, 10]"));
    let d0 = mttf_disturb(&DisturbParams { voltage: 0.0 })?;
    r.check("5 disturb at 0 V", (d0 / 10f64.powf(6.7) - 1.0).abs() < 1e-3, format!("{d0:.1} h"));
    let mut g = rng::seeded(seed);
    let mut sofr_ok = true;
    for _ in 0..1000 {
        let rates = FailureRates {
            lambda_aging: 10f64.powf(g.random_range(-8.0..2.0)),
            lambda_endurance: 10f64.powf(g.random_range(-8.0..2.0)),
            lambda_disturb: 10f64.powf(g.random_range(-8.0..2.0)),
        };
        let min_mttf = 1.0 / rates.lambda_aging.max(rates.lambda_endurance).max(rates.lambda_disturb);
        sofr_ok &= overall_mttf(&rates)? <= min_mttf;
    }
    r.check("5 SOFR bound", sofr_ok, "overall MTTF <= every mechanism MTTF over 1000 draws".into());
    let e = EnduranceParams { time_t: 0.0, ..cfg.reliability.endurance.clone() };
    let t0 = self_heating_temp(&e)?;
    r.check("5 T_SH at t = 0", (t0 - e.t_amb).abs() <= 1e-9 * e.t_amb, format!("{t0:.6} K vs ambient {} K", e.t_amb));
    Ok(())
}

fn cost_svg(title: &str, rows: &[CostRow]) -> String {
    let mut models: Vec<String> = Vec::new();
    for row in rows {
        if !models.contains(&row.model) {
            models.push(row.model.clone());
        }
    }
    let keys = [
        ("rep ubrain", Technique::Replication, CoreKind::Ubrain),
        ("rep crossbar", Technique::Replication, CoreKind::Crossbar),
        ("red crossbar", Technique::Redundant, CoreKind::Crossbar),
        ("prop ubrain", Technique::Proposed, CoreKind::Ubrain),
        ("prop crossbar", Technique::Proposed, CoreKind::Crossbar),
    ];
    let series: Vec<(&str, Vec<f64>)> = keys
        .iter()
        .map(|&(label, t, k)| {
            let v = models
                .iter()
                .map(|m| rows.iter().find(|x| &x.model == m && x.technique == t && x.core == k).map_or(f64::NAN, |x| x.normalized.log10()))
                .collect();
            (label, v)
        })
        .collect();
    bar_chart(title, "log10 normalized", &models, &series)
}

fn area(cfg: &ExperimentConfig, svg: bool, r: &mut Report) -> Result<()> {
    let rows = area_rows(cfg)?;
    let mut buf = Vec::new();
    write_cost_csv(&mut buf, &rows)?;
    r.add("area.csv", utf8(buf));
    if svg {
        r.add("area.svg", cost_svg("Area", &rows));
    }
    let get = |m: &str, t, k| rows.iter().find(|x| x.model == m && x.technique == t && x.core == k);
    let (mut rep_ok, mut ratio_ok, mut ordered) = (true, true, true);
    let mut ratios = Vec::new();
    for m in EVALUATED_MODELS {
        let clusters = cluster_count_estimate(m.params, &cfg.cores.ubrain) as f64;
        let first = cluster_count_estimate(EVALUATED_MODELS[0].params, &cfg.cores.ubrain) as f64;
        let (Some(rep), Some(prop)) = (get(m.name, Technique::Replication, CoreKind::Ubrain), get(m.name, Technique::Proposed, CoreKind::Ubrain)) else {
            continue;
        };
        rep_ok &= (rep.normalized - clusters / first).abs() <= 0.1;
        let ratio = prop.value / rep.value;
        ratio_ok &= (ratio - 0.5).abs() <= 0.05;
        ratios.push(ratio);
        if let (Some(p), Some(red), Some(rx)) = (
            get(m.name, Technique::Proposed, CoreKind::Crossbar),
            get(m.name, Technique::Redundant, CoreKind::Crossbar),
            get(m.name, Technique::Replication, CoreKind::Crossbar),
        ) {
            ordered &= p.value < red.value && red.value < rx.value;
        }
    }
    r.check("9 replication area", rep_ok, "normalized ubrain replication = clusters/30 within 0.1".into());
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    r.check("9 proposed ratio", ratio_ok, format!("proposed/replication on ubrain in [{lo:.4}, {hi:.4}]"));
    r.check("9 crossbar ordering", ordered, "proposed < redundant < replication".into());
    Ok(())
}

fn power(cfg: &ExperimentConfig, svg: bool, r: &mut Report) -> Result<()> {
    let rows = power_rows(cfg)?;
    let mut buf = Vec::new();
    write_cost_csv(&mut buf, &rows)?;
    r.add("power.csv", utf8(buf));
    let dis = disable_rows(cfg)?;
    let mut s = String::from("core,used,savings_w,fraction\n");
    for d in &dis {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", d.core, d.used, d.savings_w, d.fraction);
    }
    r.add("power_disable.csv", s);
    if svg {
        r.add("power.svg", cost_svg("Power", &rows));
    }
    let ok = dis.windows(2).filter(|w| w[0].core == w[1].core).all(|w| w[1].savings_w <= w[0].savings_w);
    r.check("disable savings", ok, "savings fall as usage rises".into());
    Ok(())
}

fn pwl(cfg: &ExperimentConfig, seed: u64, r: &mut Report) -> Result<()> {
    let rows = pwl_comparison(cfg, seed)?;
    let mut s = String::from("segments,exp_error,pr_dev,pr_dev_euler,saturated\n");
    for row in &rows {
        let _ = writeln!(s, "{},{:.6e},{:.6e},{:.6e},{}", row.segments, row.exp_error, row.pr_dev, row.pr_dev_euler, row.saturated);
    }
    r.add("pwl.csv", s);
    let trip = round_trip_error(seed);
    r.check("6 round trip", trip <= 2f64.powi(-21), format!("{trip:.3e}"));
    if let Some(row) = rows.iter().find(|x| x.segments == 16) {
        r.check("6 exp table S=16", row.exp_error < 0.01, format!("{:.3e}", row.exp_error));
    }
    let worst = rows.iter().map(|x| x.pr_dev).fold(0.0, f64::max);
    r.check("6 pr deviation", worst < 0.01 && rows.iter().all(|x| !x.saturated), format!("max {worst:.3e}"));
    let mut by_s = rows.clone();
    by_s.sort_by_key(|x| x.segments);
    r.check("6 shrinks with S", by_s.windows(2).all(|w| w[1].pr_dev < w[0].pr_dev), by_s.iter().map(|x| format!("S={} {:.3e}", x.segments, x.pr_dev)).collect::<Vec<_>>().join(", "));
    Ok(())
}
