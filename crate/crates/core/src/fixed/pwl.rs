use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{encode, fx_add, fx_mul, fx_sub, Fixed};
use crate::error::{param, Error, Result};

/// Where segment boundaries go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Uniform,
    /// Equal share of `∫ sqrt|f''|` per segment, so curved regions get short segments.
    #[default]
    Equidistributed,
}

/// Chord interpolation table: on segment `k`, `y = slope[k]·x + intercept[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlApprox {
    lo: f64,
    hi: f64,
    breakpoints: Vec<f64>,
    bp_fixed: Vec<Fixed>,
    slopes: Vec<Fixed>,
    intercepts: Vec<Fixed>,
}

const DENSITY_GRID: usize = 1 << 14;

impl PwlApprox {
    pub fn build<F: Fn(f64) -> f64>(
        f: F,
        domain: (f64, f64),
        segments: usize,
        placement: Placement,
    ) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(param("domain", format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        if segments == 0 {
            return Err(param("segments", "must be >= 1"));
        }
        let breakpoints = match placement {
            Placement::Uniform => uniform(lo, hi, segments),
            Placement::Equidistributed => equidistributed(&f, lo, hi, segments)?,
        };
        let bp_fixed = breakpoints.iter().map(|&b| encode(b)).collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(breakpoints.len());
        for &b in &breakpoints {
            let y = f(b);
            if !y.is_finite() {
                return Err(Error::Domain(format!("f({b}) is not finite")));
            }
            values.push(y);
        }
        let mut slopes = Vec::with_capacity(segments);
        let mut intercepts = Vec::with_capacity(segments);
        for k in 0..segments {
            let m = (values[k + 1] - values[k]) / (breakpoints[k + 1] - breakpoints[k]);
            let slope = encode(m)?;
            // Anchor the quantized line on the quantized left breakpoint value.
            let c = fx_sub(encode(values[k])?, fx_mul(slope, bp_fixed[k]));
            slopes.push(slope);
            intercepts.push(c);
        }
        Ok(Self { lo, hi, breakpoints, bp_fixed, slopes, intercepts })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[Fixed] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[Fixed] {
        &self.intercepts
    }

    /// Segment holding `x`; inputs outside the domain use the end segments.
    pub fn segment_of(&self, x: Fixed) -> usize {
        let inner = &self.bp_fixed[1..self.bp_fixed.len() - 1];
        inner.partition_point(|b| b.raw() <= x.raw())
    }

    /// Evaluate on segment `k` regardless of where `x` lies.
    pub fn eval_segment(&self, k: usize, x: Fixed) -> Fixed {
        fx_add(fx_mul(self.slopes[k], x), self.intercepts[k])
    }

    pub fn eval_fixed(&self, x: Fixed) -> Fixed {
        self.eval_segment(self.segment_of(x), x)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.eval_fixed(encode(x)?).to_f64())
    }

    /// Largest `|pwl(x) - f(x)|` over `points` evenly spaced grid points.
    pub fn max_error<F: Fn(f64) -> f64>(&self, f: F, points: usize) -> Result<f64> {
        let n = points.max(2);
        let mut worst = 0.0f64;
        for i in 0..n {
            let x = self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64;
            worst = worst.max((self.eval(x)? - f(x)).abs());
        }
        Ok(worst)
    }

    /// Table as loaded into block RAM: `segment,breakpoint,slope_raw,intercept_raw`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "segment,breakpoint,slope_raw,intercept_raw")?;
        for k in 0..self.segments() {
            writeln!(
                w,
                "{},{},{},{}",
                k,
                self.breakpoints[k],
                self.slopes[k].raw(),
                self.intercepts[k].raw()
            )?;
        }
        Ok(())
    }
}

fn uniform(lo: f64, hi: f64, s: usize) -> Vec<f64> {
    (0..=s)
        .map(|k| if k == s { hi } else { lo + (hi - lo) * (k as f64 / s as f64) })
        .collect()
}

fn equidistributed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, s: usize) -> Result<Vec<f64>> {
    let n = DENSITY_GRID;
    let h = (hi - lo) / n as f64;
    let ys: Vec<f64> = (0..=n).map(|i| f(lo + h * i as f64)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain("function is not finite on the domain".into()));
    }
    // sqrt|f''| at grid nodes; one-sided at the ends.
    let mut dens = vec![0.0; n + 1];
    for i in 1..n {
        dens[i] = ((ys[i + 1] - 2.0 * ys[i] + ys[i - 1]) / (h * h)).abs().sqrt();
    }
    dens[0] = dens[1];
    dens[n] = dens[n - 1];
    let mean = dens.iter().sum::<f64>() / (n + 1) as f64;
    if !(mean > 0.0) {
        return Ok(uniform(lo, hi, s));
    }
    // A small floor keeps segments finite where f is straight.
    let floor = 0.01 * mean;
    let mut cum = vec![0.0; n + 1];
    for i in 1..=n {
        cum[i] = cum[i - 1] + 0.5 * h * (dens[i - 1] + dens[i] + 2.0 * floor);
    }
    let total = cum[n];
    let mut out = Vec::with_capacity(s + 1);
    out.push(lo);
    let mut j = 1;
    for k in 1..s {
        let target = total * (k as f64 / s as f64);
        while cum[j] < target {
            j += 1;
        }
        let frac = (target - cum[j - 1]) / (cum[j] - cum[j - 1]);
        out.push(lo + h * ((j - 1) as f64 + frac));
    }
    out.push(hi);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::FixedFormat;

    fn exp_neg(x: f64) -> f64 {
        (-x).exp()
    }

    #[test]
    fn linear_function_is_reproduced() {
        for placement in [Placement::Uniform, Placement::Equidistributed] {
            let p = PwlApprox::build(|x| 3.0 * x - 2.0, (-4.0, 4.0), 8, placement).unwrap();
            let err = p.max_error(|x| 3.0 * x - 2.0, 10_000).unwrap();
            assert!(err <= 2.0 * FixedFormat::resolution(), "{placement:?}: {err}");
        }
    }

    #[test]
    fn exp_decay_sixteen_segments_meets_bound() {
        let p = PwlApprox::build(exp_neg, (0.0, 10.0), 16, Placement::Equidistributed).unwrap();
        assert!(p.max_error(exp_neg, 10_000).unwrap() < 0.01);
    }

    #[test]
    fn uniform_chords_match_textbook_error() {
        let p = PwlApprox::build(exp_neg, (0.0, 10.0), 16, Placement::Uniform).unwrap();
        let e = p.max_error(exp_neg, 10_000).unwrap();
        assert!((e - 0.0361).abs() < 5e-4, "{e}");
    }

    #[test]
    fn doubling_segments_never_increases_error_for_convex_functions() {
        for placement in [Placement::Uniform, Placement::Equidistributed] {
            for f in [exp_neg as fn(f64) -> f64, |x: f64| x * x, |x: f64| -(x + 1.0).ln()] {
                let mut last = f64::INFINITY;
                for s in [1, 2, 4, 8, 16, 32, 64] {
                    let p = PwlApprox::build(f, (0.0, 10.0), s, placement).unwrap();
                    let e = p.max_error(f, 10_000).unwrap();
                    assert!(e <= last + 1e-12, "{placement:?} S={s}: {e} > {last}");
                    last = e;
                }
            }
        }
    }

    #[test]
    fn equidistributed_breakpoints_nest_under_doubling() {
        let a = PwlApprox::build(exp_neg, (0.0, 10.0), 16, Placement::Equidistributed).unwrap();
        let b = PwlApprox::build(exp_neg, (0.0, 10.0), 32, Placement::Equidistributed).unwrap();
        for (k, &bp) in a.breakpoints().iter().enumerate() {
            assert_eq!(bp, b.breakpoints()[2 * k]);
        }
    }

    #[test]
    fn continuity_at_breakpoints() {
        let p = PwlApprox::build(exp_neg, (0.0, 10.0), 16, Placement::Equidistributed).unwrap();
        for k in 1..p.segments() {
            let x = p.bp_fixed[k];
            let width = p.breakpoints()[k] - p.breakpoints()[k - 1];
            let gap = (p.eval_segment(k - 1, x).to_f64() - p.eval_segment(k, x).to_f64()).abs();
            // One rounding at each end plus the slope quantum over the segment width.
            let bound = 2.0 * FixedFormat::resolution() + 0.5 * FixedFormat::resolution() * width;
            assert!(gap <= bound, "k={k} gap={gap} bound={bound}");
        }
    }

    #[test]
    fn breakpoints_strictly_increase() {
        for s in [1, 3, 16, 64] {
            let p = PwlApprox::build(exp_neg, (0.0, 10.0), s, Placement::Equidistributed).unwrap();
            assert!(p.breakpoints().windows(2).all(|w| w[0] < w[1]));
            assert_eq!(p.breakpoints().len(), s + 1);
        }
    }

    #[test]
    fn csv_dump_shape() {
        let p = PwlApprox::build(exp_neg, (0.0, 10.0), 4, Placement::Uniform).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "segment,breakpoint,slope_raw,intercept_raw");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,"));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(PwlApprox::build(exp_neg, (1.0, 1.0), 4, Placement::Uniform).is_err());
        assert!(PwlApprox::build(exp_neg, (0.0, 1.0), 0, Placement::Uniform).is_err());
        assert!(PwlApprox::build(|x: f64| 1.0 / x, (-1.0, 1.0), 4, Placement::Equidistributed).is_err());
    }
}
