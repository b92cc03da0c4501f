use std::io::Write;

use serde::{Deserialize, Serialize};

use super::train::{bernoulli, FaultSchedule, SpikeTrain};
use super::{step, AstroParams, AstroState};
use crate::error::{param, Result};
use crate::rng;
use crate::snn::LifParams;

/// Whether the astrocyte's PR drives transmission or PR stays at `pr0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    #[default]
    Astrocyte,
    Frozen,
}

/// A LIF neuron behind the enclosed synapses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteNeuron {
    /// Independent release sites per presynaptic source.
    pub synapses_per_source: u32,
    /// Potential added per transmitted event.
    pub weight: f64,
    pub lif: LifParams,
}

impl Default for SiteNeuron {
    fn default() -> Self {
        Self {
            synapses_per_source: 10,
            weight: 1.0 / 150.0,
            lif: LifParams { v_threshold: 1.0, leak_tau: 0.3, v_reset: 0.0, refractory: 0.0 },
        }
    }
}

/// What the trace's output rate counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SiteReadout {
    /// Transmitted events summed over sources.
    #[default]
    Release,
    /// Spikes of a postsynaptic site neuron.
    Neuron(SiteNeuron),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub duration: f64,
    pub sample_every: usize,
    pub seed: u64,
    pub readout: SiteReadout,
    pub feedback: Feedback,
    /// Starting state; quiescent when `None`.
    pub initial: Option<AstroState>,
}

impl SimOptions {
    pub fn new(duration: f64, sample_every: usize, seed: u64) -> Self {
        Self {
            duration,
            sample_every,
            seed,
            readout: SiteReadout::Release,
            feedback: Feedback::Astrocyte,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub state: AstroState,
    pub out_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstroTrace {
    pub dt: f64,
    pub sample_every: usize,
    pub samples: Vec<TraceSample>,
    /// Output events per integration step.
    pub out_counts: Vec<u32>,
    /// A fixed-point run hit a saturation limit.
    pub saturated: bool,
}

impl AstroTrace {
    pub fn period(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    /// Output rate (Hz) over `[start, end)`, resolved to whole steps.
    pub fn rate_between(&self, start: f64, end: f64) -> Result<f64> {
        let a = (start / self.dt).round() as usize;
        let b = ((end / self.dt).round() as usize).min(self.out_counts.len());
        if a >= b {
            return Err(param("window", format!("empty window [{start}, {end})")));
        }
        let n: u64 = self.out_counts[a..b].iter().map(|&c| u64::from(c)).sum();
        Ok(n as f64 / ((b - a) as f64 * self.dt))
    }

    /// Mean PR over samples whose time lies in `(start, end]`.
    pub fn mean_pr(&self, start: f64, end: f64) -> f64 {
        let eps = self.dt * 0.5;
        let (sum, n) = self
            .samples
            .iter()
            .filter(|s| s.state.time > start + eps && s.state.time <= end + eps)
            .fold((0.0, 0usize), |(a, n), s| (a + s.state.pr, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,ag,ca,glu,esp,dse,pr,out_rate_hz")?;
        for s in &self.samples {
            let st = &s.state;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                st.time, st.ag, st.ca, st.glu, st.esp, st.dse, st.pr, s.out_rate_hz
            )?;
        }
        Ok(())
    }
}

/// One astrocyte implementation the simulation loop can drive.
pub(crate) trait AstroCore {
    fn pr(&self) -> f64;
    fn advance(&mut self, spikes: u32) -> Result<()>;
    fn snapshot(&self) -> AstroState;
    fn saturated(&self) -> bool {
        false
    }
}

struct FloatCore<'a> {
    params: &'a AstroParams,
    state: AstroState,
}

impl AstroCore for FloatCore<'_> {
    fn pr(&self) -> f64 {
        self.state.pr
    }

    fn advance(&mut self, spikes: u32) -> Result<()> {
        self.state = step(&self.state, self.params, spikes)?;
        Ok(())
    }

    fn snapshot(&self) -> AstroState {
        self.state
    }
}

/// Drive one astrocyte with `sources`, transmitting each surviving spike with the current PR.
pub fn simulate(
    params: &AstroParams,
    sources: &[SpikeTrain],
    faults: &FaultSchedule,
    opts: &SimOptions,
) -> Result<AstroTrace> {
    params.validate()?;
    let mut state = opts.initial.unwrap_or_else(|| AstroState::rest(params));
    state.time = 0.0;
    let mut core = FloatCore { params, state };
    run(&mut core, params, sources, faults, opts)
}

pub(crate) fn run<C: AstroCore>(
    core: &mut C,
    params: &AstroParams,
    sources: &[SpikeTrain],
    faults: &FaultSchedule,
    opts: &SimOptions,
) -> Result<AstroTrace> {
    if opts.sample_every == 0 {
        return Err(param("sample_every", "must be >= 1"));
    }
    if !(opts.duration > 0.0) {
        return Err(param("duration", "must be > 0"));
    }
    for (i, s) in sources.iter().enumerate() {
        if opts.duration > s.duration() + 1e-9 {
            return Err(param(
                "duration",
                format!("{} exceeds source {i} duration {}", opts.duration, s.duration()),
            ));
        }
    }
    let synapses = match &opts.readout {
        SiteReadout::Release => 1,
        SiteReadout::Neuron(n) => {
            n.lif.validate()?;
            if n.synapses_per_source == 0 {
                return Err(param("synapses_per_source", "must be >= 1"));
            }
            n.synapses_per_source
        }
    };

    let dt = params.dt;
    let n_steps = (opts.duration / dt).round() as usize;
    // Surviving spikes per step, after the fault schedule.
    let mut arrivals = vec![0u32; n_steps];
    for (s, train) in sources.iter().enumerate() {
        for &t in train.events() {
            let i = (t / dt) as usize;
            if i < n_steps && !faults.is_cut(s, t) {
                arrivals[i] += 1;
            }
        }
    }

    let mut rng = rng::seeded(opts.seed);
    let mut v = 0.0;
    let mut refractory_left = 0.0;
    let mut out_counts = Vec::with_capacity(n_steps);
    let mut samples = Vec::with_capacity(n_steps / opts.sample_every + 1);
    let mut window_count = 0u64;
    for &k in &arrivals {
        let pr = match opts.feedback {
            Feedback::Astrocyte => core.pr(),
            Feedback::Frozen => params.pr0,
        };
        let mut transmitted = 0u32;
        for _ in 0..k * synapses {
            if bernoulli(&mut rng, pr) {
                transmitted += 1;
            }
        }
        core.advance(k)?;
        let out = match &opts.readout {
            SiteReadout::Release => transmitted,
            SiteReadout::Neuron(n) => {
                v -= v * dt / n.lif.leak_tau;
                if refractory_left > 0.0 {
                    refractory_left -= dt;
                    0
                } else {
                    v += n.weight * f64::from(transmitted);
                    if v >= n.lif.v_threshold {
                        v = n.lif.v_reset;
                        refractory_left = n.lif.refractory;
                        1
                    } else {
                        0
                    }
                }
            }
        };
        out_counts.push(out);
        window_count += u64::from(out);
        if out_counts.len() % opts.sample_every == 0 {
            let mut state = core.snapshot();
            state.time = out_counts.len() as f64 * dt;
            samples.push(TraceSample {
                state,
                out_rate_hz: window_count as f64 / (opts.sample_every as f64 * dt),
            });
            window_count = 0;
        }
    }
    Ok(AstroTrace {
        dt,
        sample_every: opts.sample_every,
        samples,
        out_counts,
        saturated: core.saturated(),
    })
}
