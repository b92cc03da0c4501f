//! The astrocyte step computed entirely in 42-bit fixed point.
//!
//! Concentrations are held in nM so per-step decrements stay far above one ulp.
//! Each decay uses `1 - e^-x = x·φ1(x)` with `φ1(x) = (1 - e^-x)/x` read from a PWL
//! table; the factor is kept with 16 extra fraction bits.

use super::{encode, fx_add, fx_mul, fx_sub, mul_shr, Fixed, FixedFormat, Placement, PwlApprox};
use crate::astro::sim::{run, AstroCore};
use crate::astro::{AstroParams, AstroState, AstroTrace, DseSign, FaultSchedule, SimOptions, SpikeTrain};
use crate::error::{param, Result};

const NM_PER_UM: f64 = 1000.0;
/// Extra fraction bits on decay factors.
const FACTOR_SHIFT: u32 = 16;
/// Extra fraction bits on the PR gain.
const GAIN_SHIFT: u32 = 36;
const PHI_DOMAIN: (f64, f64) = (0.0, 10.0);

fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FxAstroParams {
    base: AstroParams,
    table: PwlApprox,
    c_ag: Fixed,
    c_ca: Fixed,
    c_glu: Fixed,
    c_esp: Fixed,
    ag_impulse: Fixed,
    glu_impulse: Fixed,
    ca_threshold: Fixed,
    ca_gain: Fixed,
    esp_gain: Fixed,
    dse_gain: Fixed,
    pr0: Fixed,
    pr_gain: Fixed,
}

impl FxAstroParams {
    /// Quantize `params`, building a `segments`-piece table for φ1 on [0, 10].
    pub fn new(params: &AstroParams, segments: usize, placement: Placement) -> Result<Self> {
        let table = PwlApprox::build(phi1, PHI_DOMAIN, segments, placement)?;
        Self::with_table(params, table)
    }

    pub fn with_table(params: &AstroParams, table: PwlApprox) -> Result<Self> {
        params.validate()?;
        let factor = |tau: f64| -> Result<Fixed> {
            let x = params.dt / tau;
            if x > PHI_DOMAIN.1 {
                return Err(param("dt", format!("dt/tau = {x} outside the decay table")));
            }
            let scale = (1u64 << FACTOR_SHIFT) as f64;
            Ok(fx_mul(encode(x * scale)?, table.eval_fixed(encode(x)?)))
        };
        let dse_k = match params.dse_sign {
            DseSign::Narrative => params.k_ag,
            DseSign::Literal => -params.k_ag,
        };
        Ok(Self {
            c_ag: factor(params.tau_ag)?,
            c_ca: factor(params.tau_ca)?,
            c_glu: factor(params.tau_glu)?,
            c_esp: factor(params.tau_esp)?,
            ag_impulse: encode(params.ag_impulse() * NM_PER_UM)?,
            glu_impulse: encode(params.glu_impulse() * NM_PER_UM)?,
            ca_threshold: encode(params.ca_threshold * NM_PER_UM)?,
            ca_gain: encode(params.k_plc * params.tau_ca)?,
            esp_gain: encode(params.m_esp / NM_PER_UM)?,
            dse_gain: encode(dse_k / NM_PER_UM)?,
            pr0: encode(params.pr0)?,
            pr_gain: Fixed::from_raw((params.pr0 / 100.0 * 2f64.powi(GAIN_SHIFT as i32)).round() as i64),
            base: params.clone(),
            table,
        })
    }

    pub fn params(&self) -> &AstroParams {
        &self.base
    }

    pub fn table(&self) -> &PwlApprox {
        &self.table
    }
}

/// Fixed-point astrocyte state; `ag`, `glu` and `ca` in nM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedAstroState {
    pub ag: Fixed,
    pub glu: Fixed,
    pub esp: Fixed,
    pub ca: Fixed,
    pub dse: Fixed,
    pub pr: Fixed,
    pub steps: u64,
}

impl FixedAstroState {
    pub fn from_float(s: &AstroState) -> Result<Self> {
        Ok(Self {
            ag: encode(s.ag * NM_PER_UM)?,
            glu: encode(s.glu * NM_PER_UM)?,
            esp: encode(s.esp)?,
            ca: encode(s.ca * NM_PER_UM)?,
            dse: encode(s.dse)?,
            pr: encode(s.pr)?,
            steps: 0,
        })
    }

    pub fn to_float(&self, dt: f64) -> AstroState {
        AstroState {
            ag: self.ag.to_f64() / NM_PER_UM,
            glu: self.glu.to_f64() / NM_PER_UM,
            esp: self.esp.to_f64(),
            ca: self.ca.to_f64() / NM_PER_UM,
            dse: self.dse.to_f64(),
            pr: self.pr.to_f64(),
            time: self.steps as f64 * dt,
        }
    }

    pub fn saturated(&self) -> bool {
        [self.ag, self.glu, self.esp, self.ca, self.dse, self.pr].iter().any(|f| f.saturated())
    }
}

fn decrement(v: Fixed, c: Fixed) -> Fixed {
    mul_shr(v, c, FixedFormat::FRAC_BITS + FACTOR_SHIFT)
}

/// One step; every update reads only the previous state.
pub fn fixed_astro_step(s: &FixedAstroState, p: &FxAstroParams, spikes: u32) -> FixedAstroState {
    let inject = Fixed::from_raw(p.ag_impulse.raw().saturating_mul(i64::from(spikes)));
    let ag = fx_add(fx_sub(s.ag, decrement(s.ag, p.c_ag)), inject);
    let ca_target = fx_mul(p.ca_gain, s.ag);
    let mut ca = fx_add(s.ca, decrement(fx_sub(ca_target, s.ca), p.c_ca));
    let mut glu = fx_sub(s.glu, decrement(s.glu, p.c_glu));
    let esp_target = fx_mul(p.esp_gain, s.glu);
    let esp = fx_add(s.esp, decrement(fx_sub(esp_target, s.esp), p.c_esp));
    if ca.raw() >= p.ca_threshold.raw() {
        ca = fx_sub(ca, p.ca_threshold);
        glu = fx_add(glu, p.glu_impulse);
    }
    let ag = ag.max(Fixed::ZERO);
    let dse = fx_mul(p.dse_gain, ag);
    let drive = mul_shr(fx_add(dse, esp), p.pr_gain, GAIN_SHIFT);
    let pr = fx_add(p.pr0, drive).max(Fixed::ZERO).min(Fixed::ONE);
    FixedAstroState {
        ag,
        glu: glu.max(Fixed::ZERO),
        esp,
        ca: ca.max(Fixed::ZERO),
        dse,
        pr,
        steps: s.steps + 1,
    }
}

struct FixedCore<'a> {
    params: &'a FxAstroParams,
    state: FixedAstroState,
}

impl AstroCore for FixedCore<'_> {
    fn pr(&self) -> f64 {
        self.state.pr.to_f64()
    }

    fn advance(&mut self, spikes: u32) -> Result<()> {
        self.state = fixed_astro_step(&self.state, self.params, spikes);
        Ok(())
    }

    fn snapshot(&self) -> AstroState {
        self.state.to_float(self.params.base.dt)
    }

    fn saturated(&self) -> bool {
        self.state.saturated()
    }
}

/// Same loop as [`crate::astro::simulate`] with the fixed-point datapath.
pub fn simulate_fixed(
    params: &FxAstroParams,
    sources: &[SpikeTrain],
    faults: &FaultSchedule,
    opts: &SimOptions,
) -> Result<AstroTrace> {
    let init = opts.initial.unwrap_or_else(|| AstroState::rest(&params.base));
    let mut core = FixedCore { params, state: FixedAstroState::from_float(&init)? };
    run(&mut core, &params.base, sources, faults, opts)
}
