//! Failure-rate models for logic aging and NVM wear, and their aggregation.
//!
//! All rates are per hour and all MTTFs in hours.

use std::io::Write;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng;

pub const BOLTZMANN_EV: f64 = 8.617333262e-5;
/// Aging MTTF anchor used to calibrate the BTI constant: two years.
pub const BTI_ANCHOR_HOURS: f64 = 17_532.0;

/// Bias temperature instability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BtiParams {
    pub a_const: f64,
    pub gamma_v: f64,
    /// Activation energy (eV).
    pub e_a: f64,
    pub k_boltz: f64,
    pub temperature: f64,
    pub voltage: f64,
}

impl Default for BtiParams {
    /// Calibrated so the MTTF is two years at 1.0 V and 300 K.
    fn default() -> Self {
        let mut p = Self {
            a_const: 1.0,
            gamma_v: 2.0,
            e_a: 0.1,
            k_boltz: BOLTZMANN_EV,
            temperature: 300.0,
            voltage: 1.0,
        };
        p.a_const = Self::calibrate_a(&p, BTI_ANCHOR_HOURS);
        p
    }
}

impl BtiParams {
    /// The `A` that makes `mttf_bti` equal `target_hours` with the other fields of `p`.
    pub fn calibrate_a(p: &BtiParams, target_hours: f64) -> f64 {
        target_hours * p.voltage.powf(p.gamma_v) / (p.e_a / (p.k_boltz * p.temperature)).exp()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_const", self.a_const),
            ("k_boltz", self.k_boltz),
            ("temperature", self.temperature),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("gamma_v", self.gamma_v), ("e_a", self.e_a), ("voltage", self.voltage)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(param(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// NVM cell self-heating and endurance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnduranceParams {
    /// Fitting parameter (K).
    pub gamma_fit: f64,
    /// Cell current (A).
    pub i_cell: f64,
    /// Cell resistance (Ω).
    pub r_cell: f64,
    /// Core material thickness (cm).
    pub thickness_l: f64,
    /// Core volume (cm³).
    pub volume_v: f64,
    /// Heat capacity (J·K⁻¹·cm⁻³).
    pub heat_capacity_c: f64,
    /// Opaque positive factor; units are not pinned down.
    pub k_factor: f64,
    pub t_amb: f64,
    /// Elapsed heating time (s).
    pub time_t: f64,
    /// Use the additive printed form instead of the product form.
    pub tsh_literal: bool,
}

impl Default for EnduranceParams {
    fn default() -> Self {
        Self {
            gamma_fit: 1000.0,
            i_cell: 100e-6,
            r_cell: 10e3,
            thickness_l: 120e-7,
            volume_v: 4e-14,
            heat_capacity_c: 1.25,
            k_factor: 0.005,
            t_amb: 300.0,
            time_t: 100e-9,
            tsh_literal: false,
        }
    }
}

impl EnduranceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("i_cell", self.i_cell),
            ("r_cell", self.r_cell),
            ("thickness_l", self.thickness_l),
            ("volume_v", self.volume_v),
            ("heat_capacity_c", self.heat_capacity_c),
            ("k_factor", self.k_factor),
            ("t_amb", self.t_amb),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("gamma_fit", self.gamma_fit), ("time_t", self.time_t)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(param(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbParams {
    pub voltage: f64,
}

impl Default for DisturbParams {
    fn default() -> Self {
        Self { voltage: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureRates {
    pub lambda_aging: f64,
    pub lambda_endurance: f64,
    pub lambda_disturb: f64,
}

impl FailureRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_aging", self.lambda_aging),
            ("lambda_endurance", self.lambda_endurance),
            ("lambda_disturb", self.lambda_disturb),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(param(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn mttf_bti(p: &BtiParams) -> Result<f64> {
    p.validate()?;
    if p.voltage == 0.0 {
        return Err(Error::Domain("BTI MTTF is undefined at zero voltage".into()));
    }
    Ok(p.a_const / p.voltage.powf(p.gamma_v) * (p.e_a / (p.k_boltz * p.temperature)).exp())
}

pub fn failure_rate(mttf_hours: f64) -> Result<f64> {
    if !(mttf_hours > 0.0) {
        return Err(Error::Domain(format!("MTTF must be > 0, got {mttf_hours}")));
    }
    Ok(1.0 / mttf_hours)
}

/// Self-heating temperature (K).
pub fn self_heating_temp(p: &EnduranceParams) -> Result<f64> {
    p.validate()?;
    let l2 = p.thickness_l * p.thickness_l;
    let rise = p.i_cell * p.i_cell * p.r_cell * l2 / (p.k_factor * p.volume_v);
    let settle = -(-p.k_factor * p.time_t / (l2 * p.heat_capacity_c)).exp_m1();
    Ok(if p.tsh_literal {
        rise - settle + p.t_amb
    } else {
        rise * settle + p.t_amb
    })
}

pub fn mttf_endurance(p: &EnduranceParams) -> Result<f64> {
    let t_sh = self_heating_temp(p)?;
    if !(t_sh > 0.0) {
        return Err(Error::Domain(format!("self-heating temperature {t_sh} K is not positive")));
    }
    Ok((p.gamma_fit / t_sh).exp())
}

pub fn mttf_disturb(p: &DisturbParams) -> Result<f64> {
    if !(p.voltage.is_finite() && p.voltage >= 0.0) {
        return Err(param("voltage", format!("must be >= 0, got {}", p.voltage)));
    }
    Ok(10f64.powf(-14.7 * p.voltage + 6.7))
}

/// Endurance given in cycles, converted to hours at `access_hz`.
pub fn cycles_to_hours(cycles: f64, access_hz: f64) -> Result<f64> {
    if !(access_hz > 0.0) || !(cycles >= 0.0) {
        return Err(param("access_hz", "need cycles >= 0 and access_hz > 0"));
    }
    Ok(cycles / access_hz / 3600.0)
}

/// Overall failure rate, the sum of the mechanisms.
pub fn sofr(r: &FailureRates) -> Result<f64> {
    r.validate()?;
    Ok(r.lambda_aging + r.lambda_endurance + r.lambda_disturb)
}

/// `1/λ`, or infinity when nothing fails.
pub fn overall_mttf(r: &FailureRates) -> Result<f64> {
    let l = sofr(r)?;
    Ok(if l == 0.0 { f64::INFINITY } else { 1.0 / l })
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Probability of exactly `n` failures in `interval_hours`.
pub fn p_failures(lambda: f64, interval_hours: f64, n: u32) -> Result<f64> {
    if !(lambda >= 0.0 && interval_hours >= 0.0) || !lambda.is_finite() || !interval_hours.is_finite() {
        return Err(param("lambda/interval", "must be finite and >= 0"));
    }
    let mu = lambda * interval_hours;
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    if n == 0 {
        return Ok((-mu).exp());
    }
    Ok((f64::from(n) * mu.ln() - ln_factorial(n) - mu).exp())
}

/// One Poisson draw of the failure count.
pub fn sample_fault_count(lambda: f64, interval_hours: f64, seed: u64) -> Result<u64> {
    let mu = lambda * interval_hours;
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(param("lambda/interval", "need a finite, non-negative product"));
    }
    if mu == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mu).map_err(|e| param("lambda", e.to_string()))?;
    Ok(dist.sample(&mut rng::seeded(seed)) as u64)
}

/// Parameter sets for all three mechanisms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityParams {
    pub bti: BtiParams,
    pub endurance: EnduranceParams,
    pub disturb: DisturbParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRow {
    pub model: String,
    pub rates: FailureRates,
    pub lambda_overall: f64,
    pub mttf: f64,
    /// `P_0 ..= P_n` over the report interval.
    pub p: Vec<f64>,
}

impl ReliabilityParams {
    pub fn rates(&self) -> Result<FailureRates> {
        Ok(FailureRates {
            lambda_aging: failure_rate(mttf_bti(&self.bti)?)?,
            lambda_endurance: failure_rate(mttf_endurance(&self.endurance)?)?,
            lambda_disturb: failure_rate(mttf_disturb(&self.disturb)?)?,
        })
    }

    pub fn report(&self, model: &str, interval_hours: f64, max_n: u32) -> Result<ReliabilityRow> {
        let rates = self.rates()?;
        let lambda_overall = sofr(&rates)?;
        let p = (0..=max_n)
            .map(|n| p_failures(lambda_overall, interval_hours, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReliabilityRow {
            model: model.to_string(),
            rates,
            lambda_overall,
            mttf: overall_mttf(&rates)?,
            p,
        })
    }
}

pub fn write_report_csv<W: Write>(rows: &[ReliabilityRow], mut w: W) -> std::io::Result<()> {
    let max_n = rows.iter().map(|r| r.p.len()).max().unwrap_or(0);
    write!(w, "model,lambda_aging,lambda_endurance,lambda_disturb,lambda_overall,mttf_h")?;
    for n in 0..max_n {
        write!(w, ",p{n}")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{}",
            r.model, r.rates.lambda_aging, r.rates.lambda_endurance, r.rates.lambda_disturb, r.lambda_overall, r.mttf
        )?;
        for p in &r.p {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bti_defaults_hit_two_years() {
        let m = mttf_bti(&BtiParams::default()).unwrap();
        assert!((m - 17_532.0).abs() < 1e-6);
        assert!((failure_rate(m).unwrap() - 5.704e-5).abs() < 1e-8);
    }

    #[test]
    fn bti_limits_and_power_law() {
        let p = BtiParams { gamma_v: 0.0, e_a: 0.0, a_const: 42.0, ..Default::default() };
        assert_eq!(mttf_bti(&p).unwrap(), 42.0);
        let base = BtiParams::default();
        let doubled = BtiParams { voltage: 2.0, ..base.clone() };
        let ratio = mttf_bti(&base).unwrap() / mttf_bti(&doubled).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
        let zero = BtiParams { voltage: 0.0, ..base };
        assert!(matches!(mttf_bti(&zero), Err(Error::Domain(_))));
    }

    #[test]
    fn failure_rate_domain() {
        assert_eq!(failure_rate(1.0).unwrap(), 1.0);
        assert!(failure_rate(0.0).is_err());
        assert!(failure_rate(-3.0).is_err());
    }

    #[test]
    fn self_heating_limits() {
        let p = EnduranceParams { time_t: 0.0, ..Default::default() };
        assert_eq!(self_heating_temp(&p).unwrap(), 300.0);
        let lit = EnduranceParams { tsh_literal: true, ..p };
        // The printed form sits one full rise above ambient at t = 0.
        let rise = self_heating_temp(&EnduranceParams { time_t: 1e9, ..Default::default() }).unwrap() - 300.0;
        assert!((self_heating_temp(&lit).unwrap() - 300.0 - rise).abs() < 1e-9);
        let p = EnduranceParams::default();
        let rise_expected = p.i_cell.powi(2) * p.r_cell * p.thickness_l.powi(2) / (p.k_factor * p.volume_v);
        assert!((rise - rise_expected).abs() < 1e-9);
    }

    #[test]
    fn self_heating_increases_with_current() {
        let mut last = 0.0;
        for i in 1..50 {
            let p = EnduranceParams { i_cell: f64::from(i) * 1e-5, ..Default::default() };
            let t = self_heating_temp(&p).unwrap();
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn endurance_examples() {
        let p = EnduranceParams { gamma_fit: 0.0, ..Default::default() };
        assert_eq!(mttf_endurance(&p).unwrap(), 1.0);
        // T_SH = 300 K with t = 0.
        let p = EnduranceParams { time_t: 0.0, ..Default::default() };
        assert!((mttf_endurance(&p).unwrap() - (10.0f64 / 3.0).exp()).abs() < 1e-12);
        assert!((mttf_endurance(&p).unwrap() - 28.03).abs() < 0.01);
        let hotter = EnduranceParams { time_t: 1e-6, ..Default::default() };
        assert!(mttf_endurance(&hotter).unwrap() < mttf_endurance(&p).unwrap());
    }

    #[test]
    fn disturb_examples() {
        let m0 = mttf_disturb(&DisturbParams { voltage: 0.0 }).unwrap();
        assert!((m0 / 10f64.powf(6.7) - 1.0).abs() < 1e-12);
        assert!((m0 - 5.0119e6).abs() < 1e2);
        let one = mttf_disturb(&DisturbParams { voltage: 6.7 / 14.7 }).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        // 0.4557 is the root rounded to four places, which alone moves the result by 0.3%.
        assert!((mttf_disturb(&DisturbParams { voltage: 0.4557 }).unwrap() - 1.0).abs() < 5e-3);
        assert!((mttf_disturb(&DisturbParams { voltage: 0.3 }).unwrap() - 194.98).abs() < 0.01);
    }

    #[test]
    fn sofr_examples() {
        let zero = FailureRates::default();
        assert_eq!(sofr(&zero).unwrap(), 0.0);
        assert!(overall_mttf(&zero).unwrap().is_infinite());
        let r = FailureRates { lambda_aging: 1.0, lambda_endurance: 2.0, lambda_disturb: 3.0 };
        assert_eq!(sofr(&r).unwrap(), 6.0);
    }

    #[test]
    fn pmf_matches_factorial_form() {
        for &mu in &[0.1f64, 1.0, 2.5, 7.0] {
            let mut fact = 1.0f64;
            for n in 0..=20u32 {
                if n > 0 {
                    fact *= f64::from(n);
                }
                let brute = mu.powi(n as i32) / fact * (-mu).exp();
                assert!((p_failures(mu, 1.0, n).unwrap() - brute).abs() < 1e-12);
            }
        }
        assert!((p_failures(1.0, 1.0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let big = p_failures(300.0, 1.0, 500).unwrap();
        assert!(big.is_finite() && big >= 0.0);
        assert_eq!(p_failures(0.0, 5.0, 0).unwrap(), 1.0);
        assert_eq!(p_failures(0.0, 5.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn sampling_mean() {
        assert_eq!(sample_fault_count(0.0, 10.0, 1).unwrap(), 0);
        assert_eq!(sample_fault_count(2.0, 2.0, 9).unwrap(), sample_fault_count(2.0, 2.0, 9).unwrap());
        let n = 100_000u64;
        let mean = (0..n).map(|s| sample_fault_count(4.0, 1.0, s).unwrap()).sum::<u64>() as f64 / n as f64;
        assert!((mean - 4.0).abs() < 0.04, "{mean}");
    }

    #[test]
    fn report_csv_has_probability_columns() {
        let row = ReliabilityParams::default().report("default", 1000.0, 3).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,lambda_aging,lambda_endurance,lambda_disturb,lambda_overall,mttf_h,p0,p1,p2,p3\n"));
    }

    proptest! {
        #[test]
        fn failure_rate_inverts_mttf(v in 0.1f64..3.0, t in 200.0f64..400.0, g in 0.0f64..4.0) {
            let p = BtiParams { voltage: v, temperature: t, gamma_v: g, ..Default::default() };
            let m = mttf_bti(&p).unwrap();
            prop_assert!(m > 0.0);
            prop_assert!((failure_rate(m).unwrap() * m - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sofr_is_permutation_invariant_and_bounds_mttf(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 1e-6f64..1.0) {
            let r1 = FailureRates { lambda_aging: a, lambda_endurance: b, lambda_disturb: c };
            let r2 = FailureRates { lambda_aging: c, lambda_endurance: a, lambda_disturb: b };
            prop_assert!((sofr(&r1).unwrap() - sofr(&r2).unwrap()).abs() < 1e-15);
            let overall = overall_mttf(&r1).unwrap();
            for l in [a, b, c] {
                if l > 0.0 {
                    prop_assert!(overall <= 1.0 / l);
                }
            }
        }

        #[test]
        fn pmf_sums_to_one(mu in 0.0f64..10.0) {
            let total: f64 = (0..=100).map(|n| p_failures(mu, 1.0, n).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn mttfs_positive_over_grid(i in 1e-6f64..1e-3, k in 1e-4f64..1.0, v in 0.0f64..1.0) {
            let e = EnduranceParams { i_cell: i, k_factor: k, ..Default::default() };
            prop_assert!(mttf_endurance(&e).unwrap() > 0.0);
            let m = mttf_disturb(&DisturbParams { voltage: v }).unwrap();
            prop_assert!(m > 0.0);
        }
    }
}
