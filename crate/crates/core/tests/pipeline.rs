use astrorepair::config::ExperimentConfig;
use astrorepair::costmodel::{design_area, design_power, power_savings_disable, Technique};
use astrorepair::netmap::{partition, validate};
use astrorepair::scenarios::synthesize_toy;
use astrorepair::snn::{accuracy, attach_astrocytes, inject_faults, FaultKind, FaultSpec};
use astrorepair::synthesis::{disable_unused, Preset, SynthesisConfig};

fn small() -> (ExperimentConfig, SynthesisConfig) {
    let cfg = ExperimentConfig::default();
    let sc = SynthesisConfig { n_r: 5, kinds: vec![FaultKind::WeightBitFlip], preset: Preset::Platform, ..Default::default() };
    (cfg, sc)
}

#[test]
fn toy_model_maps_synthesizes_and_costs() {
    let (cfg, sc) = small();
    let core = &cfg.cores.ubrain;
    let (toy, enabled) = synthesize_toy(&cfg, &sc).unwrap();
    assert!(validate(&enabled.mapping, core, &toy.model).is_empty());
    assert_eq!(enabled.mapping, partition(&toy.model, core).unwrap());
    enabled.allocation.validate().unwrap();

    let n = enabled.mapping.clusters.len();
    let used = enabled.allocation.used_per_cluster(n);
    assert!(used.iter().all(|&u| u <= core.max_astrocytes));
    let disabled = disable_unused(&enabled.allocation, n, core).unwrap();
    assert_eq!(disabled.iter().zip(&used).map(|(d, u)| d + u).collect::<Vec<_>>(), vec![core.max_astrocytes; n]);

    let total = enabled.allocation.total() as u64;
    let area = design_area(n as u64, Technique::Proposed, core, &cfg.area, total).unwrap();
    let rep = design_area(n as u64, Technique::Replication, core, &cfg.area, 0).unwrap();
    assert!(area < rep);
    let activity = vec![0.5; n];
    let p = design_power(&activity, Technique::Proposed, core, &cfg.power.model, total).unwrap();
    let (saved, frac) = power_savings_disable(&disabled, &activity, core, &cfg.power.model).unwrap();
    assert!(saved >= 0.0 && frac < 1.0 && saved < p);
}

#[test]
fn allocation_json_round_trips() {
    let (cfg, sc) = small();
    let (_, enabled) = synthesize_toy(&cfg, &sc).unwrap();
    let json = enabled.to_json().unwrap();
    let back: astrorepair::synthesis::AstroEnabledModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, enabled);
    let mut log = Vec::new();
    enabled.write_log_csv(&mut log).unwrap();
    let log = String::from_utf8(log).unwrap();
    assert!(log.starts_with("cluster,layer,iteration,a_min,astrocytes\n"));
}

#[test]
fn inserted_astrocytes_do_not_hurt_a_healthy_model() {
    let (cfg, sc) = small();
    let (toy, enabled) = synthesize_toy(&cfg, &sc).unwrap();
    let ctx = attach_astrocytes(&toy.model, &enabled.allocation, &cfg.astro, &cfg.toy.engine, &cfg.coupling, &toy.eval).unwrap();
    let seeds = [11, 12];
    let plain = accuracy(&toy.model, &toy.eval, &cfg.toy.engine, &seeds).unwrap();
    let with = ctx.accuracy(&toy.model, &toy.eval, &seeds).unwrap();
    assert!((plain - with).abs() <= 0.02, "{plain} vs {with}");

    let faulted = inject_faults(&toy.model, &FaultSpec::new(0.0, &[FaultKind::WeightBitFlip], 1)).unwrap();
    assert_eq!(accuracy(&faulted, &toy.eval, &cfg.toy.engine, &seeds).unwrap(), plain);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let mut cfg = ExperimentConfig { seed: 9, ..Default::default() };
    cfg.faults.rates = vec![0.3];
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
}
