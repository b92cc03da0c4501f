//! Astrocyte dynamics at a tripartite synapse.
//!
//! State variables and their update rules, per presynaptic spike count `n` and
//! step `dt`:
//!
//! ```text
//! AG'  = -AG/τ_AG + r_AG·w·n/dt            (2-AG, impulse of width w per spike)
//! Ca'  = k_PLC·AG - Ca/τ_Ca                 (release: Ca -= θ, Glu += r_Glu·w)
//! Glu' = -Glu/τ_Glu
//! eSP' = (m_eSP·Glu - eSP)/τ_eSP
//! DSE  = K_AG·AG
//! PR   = clamp(PR0 + PR0·(DSE + eSP)/100, 0, 1)
//! ```
//!
//! All right-hand sides are evaluated on the previous state, so the per-variable
//! updates inside a step are independent of evaluation order.

pub(crate) mod sim;
mod train;

pub use sim::{simulate, AstroTrace, Feedback, SimOptions, SiteNeuron, SiteReadout, TraceSample};
pub use train::{measure_rate, poisson_train, FaultSchedule, SpikeTrain};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// How DSE relates to AG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DseSign {
    /// `DSE = K_AG·AG`; with negative `K_AG`, DSE rises toward zero as AG falls.
    #[default]
    Narrative,
    /// `DSE = -K_AG·AG`, the printed form.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Forward Euler: decay fraction `dt/τ` per step.
    #[default]
    Euler,
    /// Exact decay over one step: fraction `1 - exp(-dt/τ)`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AstroParams {
    /// 2-AG decay time constant (s).
    pub tau_ag: f64,
    /// 2-AG production rate (µM/s).
    pub r_ag: f64,
    /// Glutamate decay time constant (s).
    pub tau_glu: f64,
    /// Glutamate production rate (µM/s).
    pub r_glu: f64,
    /// Ca²⁺ release threshold (µM).
    pub ca_threshold: f64,
    /// e-SP decay time constant (s).
    pub tau_esp: f64,
    pub m_esp: f64,
    pub k_ag: f64,
    /// Baseline transmission probability PR(0).
    pub pr0: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Calcium drive gain (1/s).
    pub k_plc: f64,
    /// Calcium decay time constant (s).
    pub tau_ca: f64,
    /// Duration over which a production rate acts per event (s).
    pub release_width: f64,
    pub dse_sign: DseSign,
    pub integrator: Integrator,
}

impl Default for AstroParams {
    fn default() -> Self {
        Self {
            tau_ag: 10.0,
            r_ag: 0.8,
            tau_glu: 0.1,
            r_glu: 10.0,
            ca_threshold: 0.3,
            tau_esp: 40.0,
            m_esp: 55_000.0,
            k_ag: -4000.0,
            pr0: 0.5,
            dt: 1e-3,
            k_plc: 218.0,
            tau_ca: 2.0,
            release_width: 1e-4,
            dse_sign: DseSign::Narrative,
            integrator: Integrator::Euler,
        }
    }
}

impl AstroParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("tau_ag", self.tau_ag),
            ("r_ag", self.r_ag),
            ("tau_glu", self.tau_glu),
            ("r_glu", self.r_glu),
            ("ca_threshold", self.ca_threshold),
            ("tau_esp", self.tau_esp),
            ("m_esp", self.m_esp),
            ("k_ag", self.k_ag),
            ("pr0", self.pr0),
            ("dt", self.dt),
            ("k_plc", self.k_plc),
            ("tau_ca", self.tau_ca),
            ("release_width", self.release_width),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(param(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("tau_ag", self.tau_ag),
            ("tau_glu", self.tau_glu),
            ("tau_esp", self.tau_esp),
            ("tau_ca", self.tau_ca),
            ("ca_threshold", self.ca_threshold),
            ("release_width", self.release_width),
        ] {
            if v <= 0.0 {
                return Err(param(name, format!("must be > 0, got {v}")));
            }
        }
        if self.r_ag < 0.0 || self.r_glu < 0.0 || self.k_plc < 0.0 {
            return Err(param("r_ag/r_glu/k_plc", "production rates must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.pr0) {
            return Err(param("pr0", format!("must lie in [0, 1], got {}", self.pr0)));
        }
        let dt_max = self.tau_glu.min(self.tau_ca) / 10.0;
        if self.dt <= 0.0 || self.dt > dt_max {
            return Err(param(
                "dt",
                format!("must lie in (0, {dt_max}], got {}", self.dt),
            ));
        }
        Ok(())
    }

    /// Per-step decay fraction for time constant `tau`.
    pub fn decay_fraction(&self, tau: f64) -> f64 {
        let x = self.dt / tau;
        match self.integrator {
            Integrator::Euler => x,
            Integrator::Exponential => -(-x).exp_m1(),
        }
    }

    /// 2-AG added per presynaptic spike (µM).
    pub fn ag_impulse(&self) -> f64 {
        self.r_ag * self.release_width
    }

    /// Glutamate added per calcium release (µM).
    pub fn glu_impulse(&self) -> f64 {
        self.r_glu * self.release_width
    }

    pub fn dse(&self, ag: f64) -> f64 {
        match self.dse_sign {
            DseSign::Narrative => self.k_ag * ag,
            DseSign::Literal => -self.k_ag * ag,
        }
    }

    /// Transmission probability for a given (DSE + e-SP) drive, clamped to [0, 1].
    pub fn release_probability(&self, dse: f64, esp: f64) -> f64 {
        (self.pr0 + self.pr0 * (dse + esp) / 100.0).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AstroState {
    pub ag: f64,
    pub glu: f64,
    pub esp: f64,
    pub ca: f64,
    pub dse: f64,
    pub pr: f64,
    pub time: f64,
}

impl AstroState {
    /// Quiescent state: all concentrations zero, `pr = pr0`.
    pub fn rest(params: &AstroParams) -> Self {
        Self {
            ag: 0.0,
            glu: 0.0,
            esp: 0.0,
            ca: 0.0,
            dse: 0.0,
            pr: params.pr0,
            time: 0.0,
        }
    }

    /// Approximate mean operating point under sustained Poisson input at `rate_hz`.
    pub fn equilibrium(params: &AstroParams, rate_hz: f64) -> Self {
        let ag = params.ag_impulse() * rate_hz * params.tau_ag;
        let drive = params.k_plc * ag;
        let theta = params.ca_threshold;
        let (ca, crossings) = if drive * params.tau_ca <= theta {
            (drive * params.tau_ca, 0.0)
        } else {
            let ca = theta / 2.0;
            (ca, ((drive - ca / params.tau_ca) / theta).max(0.0))
        };
        // Mean of an impulse train decaying by `decay_fraction` each step.
        let glu = params.glu_impulse() * crossings * params.dt / params.decay_fraction(params.tau_glu);
        let esp = params.m_esp * glu;
        let dse = params.dse(ag);
        Self {
            ag,
            glu,
            esp,
            ca,
            dse,
            pr: params.release_probability(dse, esp),
            time: 0.0,
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (name, v) in [
            ("ag", self.ag),
            ("glu", self.glu),
            ("esp", self.esp),
            ("ca", self.ca),
            ("dse", self.dse),
            ("pr", self.pr),
            ("time", self.time),
        ] {
            if !v.is_finite() {
                return Err(Error::Numeric(name));
            }
        }
        Ok(())
    }
}

/// Advance one step of `params.dt` with `spikes` presynaptic spikes arriving in it.
pub fn step(state: &AstroState, params: &AstroParams, spikes: u32) -> Result<AstroState> {
    state.check_finite()?;
    let d_ag = params.decay_fraction(params.tau_ag);
    let d_ca = params.decay_fraction(params.tau_ca);
    let d_glu = params.decay_fraction(params.tau_glu);
    let d_esp = params.decay_fraction(params.tau_esp);

    let ag = state.ag - state.ag * d_ag + params.ag_impulse() * f64::from(spikes);
    let mut ca = state.ca + (params.k_plc * params.tau_ca * state.ag - state.ca) * d_ca;
    let mut glu = state.glu - state.glu * d_glu;
    let esp = state.esp + (params.m_esp * state.glu - state.esp) * d_esp;
    if ca >= params.ca_threshold {
        ca -= params.ca_threshold;
        glu += params.glu_impulse();
    }
    let dse = params.dse(ag);
    let next = AstroState {
        ag: ag.max(0.0),
        glu: glu.max(0.0),
        esp,
        ca: ca.max(0.0),
        dse,
        pr: params.release_probability(dse, esp),
        time: state.time + params.dt,
    };
    next.check_finite()?;
    Ok(next)
}
