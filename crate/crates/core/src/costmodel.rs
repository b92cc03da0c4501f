//! Area and power estimates for replication, redundant mapping and astrocyte repair.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::netmap::{CoreKind, CoreSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Replication,
    Redundant,
    Proposed,
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technique::Replication => "replication",
            Technique::Redundant => "redundant",
            Technique::Proposed => "proposed",
        })
    }
}

impl fmt::Display for CoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreKind::Crossbar => "crossbar",
            CoreKind::Ubrain => "ubrain",
        })
    }
}

/// FPGA resources of one hardware block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockResources {
    pub bram: f64,
    pub dsp: f64,
    pub ff: f64,
    pub slice: f64,
    pub lut: f64,
    pub power_w: f64,
    pub frequency_hz: f64,
}

impl BlockResources {
    fn validate(&self, name: &'static str) -> Result<()> {
        let v = [self.bram, self.dsp, self.ff, self.slice, self.lut, self.power_w, self.frequency_hz];
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(param(name, "resource counts must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceProfile {
    pub ubrain_core: BlockResources,
    pub crossbar_core: BlockResources,
    pub astrocyte: BlockResources,
}

impl Default for ResourceProfile {
    fn default() -> Self {
        Self {
            ubrain_core: BlockResources { bram: 48.0, dsp: 0.0, ff: 129.0, slice: 117.0, lut: 114.0, power_w: 4.64, frequency_hz: 100e6 },
            crossbar_core: BlockResources { bram: 32.0, dsp: 0.0, ff: 86.0, slice: 78.0, lut: 76.0, power_w: 4.53, frequency_hz: 100e6 },
            astrocyte: BlockResources { bram: 4.0, dsp: 4.0, ff: 2368.0, slice: 670.0, lut: 1345.0, power_w: 0.538, frequency_hz: 100e6 },
        }
    }
}

impl ResourceProfile {
    pub fn validate(&self) -> Result<()> {
        self.ubrain_core.validate("ubrain_core")?;
        self.crossbar_core.validate("crossbar_core")?;
        self.astrocyte.validate("astrocyte")
    }

    pub fn core(&self, kind: CoreKind) -> &BlockResources {
        match kind {
            CoreKind::Ubrain => &self.ubrain_core,
            CoreKind::Crossbar => &self.crossbar_core,
        }
    }
}

/// Per-resource area weights. `synapse` charges every synaptic cell of a core,
/// which the logic counts alone do not cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaWeights {
    pub bram: f64,
    pub dsp: f64,
    pub ff: f64,
    pub slice: f64,
    pub lut: f64,
    pub synapse: f64,
}

impl Default for AreaWeights {
    fn default() -> Self {
        Self { bram: 30.0, dsp: 10.0, ff: 1.0, slice: 1.0, lut: 1.0, synapse: 32.0 }
    }
}

impl AreaWeights {
    fn block(&self, r: &BlockResources) -> f64 {
        self.bram * r.bram + self.dsp * r.dsp + self.ff * r.ff + self.slice * r.slice + self.lut * r.lut
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaModel {
    pub resources: ResourceProfile,
    pub weights: AreaWeights,
    pub replication_factor: f64,
    pub redundant_factor: f64,
    /// Extra multiplier on crossbar core area relative to μBrain.
    pub crossbar_scale: f64,
}

impl Default for AreaModel {
    fn default() -> Self {
        Self {
            resources: ResourceProfile::default(),
            weights: AreaWeights::default(),
            replication_factor: 2.0,
            redundant_factor: 1.25,
            crossbar_scale: 1.0,
        }
    }
}

impl AreaModel {
    pub fn validate(&self) -> Result<()> {
        self.resources.validate()?;
        let w = &self.weights;
        if [w.bram, w.dsp, w.ff, w.slice, w.lut, w.synapse].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(param("weights", "must be finite and >= 0"));
        }
        if !(self.replication_factor >= 1.0) || !(self.redundant_factor >= 1.0) {
            return Err(param("replication_factor/redundant_factor", "must be >= 1"));
        }
        if !(self.crossbar_scale > 0.0) {
            return Err(param("crossbar_scale", "must be > 0"));
        }
        Ok(())
    }

    pub fn core_area(&self, core: &CoreSpec) -> f64 {
        let a = self.weights.block(self.resources.core(core.kind)) + self.weights.synapse * core.syn_cap as f64;
        match core.kind {
            CoreKind::Crossbar => a * self.crossbar_scale,
            CoreKind::Ubrain => a,
        }
    }

    pub fn astro_area(&self) -> f64 {
        self.weights.block(&self.resources.astrocyte)
    }
}

fn check_technique(technique: Technique, core: &CoreSpec) -> Result<()> {
    if technique == Technique::Redundant && core.kind != CoreKind::Crossbar {
        return Err(Error::UnsupportedTechnique { technique: technique.to_string(), core: core.kind.to_string() });
    }
    Ok(())
}

/// Area in weighted resource units.
pub fn design_area(clusters: u64, technique: Technique, core: &CoreSpec, model: &AreaModel, astro_used: u64) -> Result<f64> {
    check_technique(technique, core)?;
    let c = clusters as f64 * model.core_area(core);
    Ok(match technique {
        Technique::Replication => c * model.replication_factor,
        Technique::Redundant => c * model.redundant_factor,
        Technique::Proposed => c + astro_used as f64 * model.astro_area(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    pub resources: ResourceProfile,
    /// Share of core power that is static; the rest scales with active synapses.
    pub static_fraction: f64,
    pub replication_factor: f64,
    pub redundant_factor: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { resources: ResourceProfile::default(), static_fraction: 0.5, replication_factor: 2.0, redundant_factor: 1.25 }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        self.resources.validate()?;
        if !(0.0..=1.0).contains(&self.static_fraction) {
            return Err(param("static_fraction", "must lie in [0, 1]"));
        }
        if !(self.replication_factor >= 1.0) || !(self.redundant_factor >= 1.0) {
            return Err(param("replication_factor/redundant_factor", "must be >= 1"));
        }
        Ok(())
    }

    pub fn static_w(&self, core: &CoreSpec) -> f64 {
        self.resources.core(core.kind).power_w * self.static_fraction
    }

    /// Watts per active synapse.
    pub fn alpha(&self, core: &CoreSpec) -> f64 {
        self.resources.core(core.kind).power_w * (1.0 - self.static_fraction) / core.syn_cap as f64
    }

    /// Watts per enabled astrocyte; one astrocyte block serves a full core.
    pub fn astro_share(&self, core: &CoreSpec) -> f64 {
        self.resources.astrocyte.power_w / core.max_astrocytes.max(1) as f64
    }

    fn core_power(&self, core: &CoreSpec, activity: f64) -> f64 {
        self.static_w(core) + self.alpha(core) * activity * core.syn_cap as f64
    }
}

/// Design power. `activity[c]` is the active-synapse fraction of cluster `c`.
pub fn design_power(
    activity: &[f64],
    technique: Technique,
    core: &CoreSpec,
    model: &PowerModel,
    astro_enabled: u64,
) -> Result<f64> {
    check_technique(technique, core)?;
    if let Some(a) = activity.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(param("activity", format!("{a} outside [0, 1]")));
    }
    let cores: f64 = activity.iter().map(|&a| model.core_power(core, a)).sum();
    Ok(match technique {
        Technique::Replication => cores * model.replication_factor,
        Technique::Redundant => cores * model.redundant_factor,
        Technique::Proposed => cores + astro_enabled as f64 * model.astro_share(core),
    })
}

/// Watts saved by gating idle astrocytes, and that saving as a fraction of the
/// same design with every astrocyte enabled.
pub fn power_savings_disable(disabled: &[usize], activity: &[f64], core: &CoreSpec, model: &PowerModel) -> Result<(f64, f64)> {
    if disabled.len() != activity.len() {
        return Err(param("activity", "need one entry per core"));
    }
    if let Some(&d) = disabled.iter().find(|&&d| d > core.max_astrocytes) {
        return Err(Error::Allocation(format!("{d} disabled astrocytes on a core with {}", core.max_astrocytes)));
    }
    let total: usize = disabled.iter().sum();
    let savings = total as f64 * model.astro_share(core);
    let full = design_power(activity, Technique::Proposed, core, model, (core.max_astrocytes * activity.len()) as u64)?;
    let fraction = if full > 0.0 { savings / full } else { 0.0 };
    Ok((savings, fraction))
}

/// Divide every value by `baseline`.
pub fn normalize(values: &[f64], baseline: f64) -> Result<Vec<f64>> {
    if !(baseline > 0.0) {
        return Err(Error::Domain(format!("baseline must be > 0, got {baseline}")));
    }
    Ok(values.iter().map(|v| v / baseline).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub model: String,
    pub technique: Technique,
    pub core: CoreKind,
    pub value: f64,
    pub normalized: f64,
}

pub fn write_cost_csv<W: Write>(mut w: W, rows: &[CostRow]) -> Result<()> {
    writeln!(w, "model,technique,core,value,normalized")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.6},{:.6}", r.model, r.technique, r.core, r.value, r.normalized)?;
    }
    Ok(())
}

/// Published normalized area rows: μBrain replication, crossbar replication,
/// crossbar redundant, co-design μBrain, co-design crossbar, platform μBrain,
/// platform crossbar.
pub const PUBLISHED_AREA: [(&str, [f64; 7]); 7] = [
    ("LeNet", [1.0, 0.8, 0.7, 0.5, 0.4, 0.6, 0.4]),
    ("AlexNet", [79.0, 68.5, 54.8, 39.2, 33.1, 45.6, 36.5]),
    ("VGGNet", [62.9, 54.6, 43.7, 31.2, 26.4, 36.4, 29.1]),
    ("ResNet", [1.1, 0.9, 0.8, 0.6, 0.5, 0.6, 0.5]),
    ("DenseNet", [13.5, 11.7, 9.4, 6.7, 5.7, 7.8, 6.2]),
    ("MobileNet", [4.4, 3.8, 3.0, 2.2, 1.8, 2.5, 2.0]),
    ("Xception", [40.0, 34.7, 27.7, 19.9, 16.8, 23.1, 18.5]),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmap::EVALUATED_MODELS;
    use proptest::prelude::*;

    fn ub() -> CoreSpec {
        CoreSpec::default_ubrain()
    }
    fn xb() -> CoreSpec {
        CoreSpec::default_crossbar()
    }

    #[test]
    fn zero_clusters_zero_area() {
        let m = AreaModel::default();
        for t in [Technique::Replication, Technique::Proposed] {
            assert_eq!(design_area(0, t, &ub(), &m, 0).unwrap(), 0.0);
        }
        assert_eq!(design_power(&[], Technique::Proposed, &ub(), &PowerModel::default(), 0).unwrap(), 0.0);
    }

    #[test]
    fn redundant_needs_crossbar() {
        let r = design_area(3, Technique::Redundant, &ub(), &AreaModel::default(), 0);
        assert!(matches!(r, Err(Error::UnsupportedTechnique { .. })));
        assert!(design_area(3, Technique::Redundant, &xb(), &AreaModel::default(), 0).is_ok());
    }

    #[test]
    fn replication_column_matches() {
        let m = AreaModel::default();
        let base = design_area(30, Technique::Replication, &ub(), &m, 0).unwrap();
        for (info, row) in EVALUATED_MODELS.iter().zip(PUBLISHED_AREA) {
            let a = design_area(info.clusters_ubrain, Technique::Replication, &ub(), &m, 0).unwrap();
            let n = normalize(&[a], base).unwrap()[0];
            assert!((n - row.1[0]).abs() <= 0.1, "{} {n}", info.name);
        }
    }

    #[test]
    fn proposed_is_about_half_of_replication() {
        let m = AreaModel::default();
        let c = 30;
        let rep = design_area(c, Technique::Replication, &ub(), &m, 0).unwrap();
        let pro = design_area(c, Technique::Proposed, &ub(), &m, c * 6).unwrap();
        assert!((pro / rep - 0.5).abs() <= 0.05, "{}", pro / rep);
    }

    #[test]
    fn crossbar_ordering() {
        let m = AreaModel::default();
        for info in EVALUATED_MODELS {
            let c = info.clusters_crossbar;
            let rep = design_area(c, Technique::Replication, &xb(), &m, 0).unwrap();
            let red = design_area(c, Technique::Redundant, &xb(), &m, 0).unwrap();
            let pro = design_area(c, Technique::Proposed, &xb(), &m, c * 4).unwrap();
            assert!(pro < red && red < rep, "{}", info.name);
        }
    }

    #[test]
    fn full_core_power_anchor() {
        let p = PowerModel::default();
        let w = design_power(&[1.0], Technique::Proposed, &ub(), &p, 6).unwrap();
        assert!((w - (4.64 + 0.538)).abs() < 1e-12);
        let w = design_power(&[1.0], Technique::Proposed, &xb(), &p, 0).unwrap();
        assert!((w - 4.53).abs() < 1e-12);
    }

    #[test]
    fn proposed_power_below_replication() {
        let p = PowerModel::default();
        for info in EVALUATED_MODELS {
            let act = vec![0.3; info.clusters_ubrain as usize];
            let rep = design_power(&act, Technique::Replication, &ub(), &p, 0).unwrap();
            let pro = design_power(&act, Technique::Proposed, &ub(), &p, info.clusters_ubrain * 6).unwrap();
            assert!(pro < rep);
        }
    }

    #[test]
    fn disabling_savings() {
        let p = PowerModel::default();
        let (w, f) = power_savings_disable(&[0, 0], &[0.5, 0.5], &ub(), &p).unwrap();
        assert_eq!((w, f), (0.0, 0.0));
        let (w, _) = power_savings_disable(&[6], &[1.0], &ub(), &p).unwrap();
        assert!((w - 6.0 * p.astro_share(&ub())).abs() < 1e-12);
        assert!(power_savings_disable(&[7], &[1.0], &ub(), &p).is_err());
    }

    #[test]
    fn normalization() {
        assert!(normalize(&[1.0], 0.0).is_err());
        assert_eq!(normalize(&[2.0, 4.0], 2.0).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        let row = CostRow { model: "LeNet".into(), technique: Technique::Proposed, core: CoreKind::Ubrain, value: 2.0, normalized: 0.5 };
        write_cost_csv(&mut out, &[row]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "model,technique,core,value,normalized\nLeNet,proposed,ubrain,2.000000,0.500000\n");
    }

    proptest! {
        #[test]
        fn linear_in_clusters(c in 0u64..5000, k in 1u64..4) {
            let m = AreaModel::default();
            let a = design_area(c, Technique::Replication, &ub(), &m, 0).unwrap();
            let b = design_area(c * k, Technique::Replication, &ub(), &m, 0).unwrap();
            prop_assert!((b - a * k as f64).abs() <= 1e-6 * b.max(1.0));
        }

        #[test]
        fn savings_monotone(a in 0usize..=6, b in 0usize..=6) {
            let p = PowerModel::default();
            let (wa, _) = power_savings_disable(&[a], &[0.5], &ub(), &p).unwrap();
            let (wb, _) = power_savings_disable(&[b], &[0.5], &ub(), &p).unwrap();
            prop_assert_eq!(a <= b, wa <= wb);
        }

        #[test]
        fn normalization_preserves_ratios(x in 0.1f64..100.0, y in 0.1f64..100.0, base in 0.1f64..10.0) {
            let n = normalize(&[x, y], base).unwrap();
            prop_assert!((n[0] / n[1] - x / y).abs() <= 1e-9 * (x / y));
        }
    }
}
