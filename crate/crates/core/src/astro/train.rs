use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    events: Vec<f64>,
    duration: f64,
}

impl SpikeTrain {
    pub fn new(events: Vec<f64>, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(param("duration", format!("must be finite and > 0, got {duration}")));
        }
        for (i, &t) in events.iter().enumerate() {
            if !(0.0..duration).contains(&t) {
                return Err(param("events", format!("event {i} at {t} outside [0, {duration})")));
            }
            if i > 0 && t <= events[i - 1] {
                return Err(param("events", format!("event {i} not strictly increasing")));
            }
        }
        Ok(Self { events, duration })
    }

    pub fn empty(duration: f64) -> Result<Self> {
        Self::new(Vec::new(), duration)
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Homogeneous Poisson process on `[0, duration)`.
pub fn poisson_train(rate: f64, duration: f64, seed: u64) -> Result<SpikeTrain> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(param("rate", format!("must be finite and >= 0, got {rate}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(param("duration", format!("must be finite and > 0, got {duration}")));
    }
    let mut events = Vec::with_capacity((rate * duration * 1.1) as usize + 8);
    if rate > 0.0 {
        let mut rng = rng::seeded(seed);
        let gap = Exp::new(rate).expect("rate checked positive");
        let mut t = gap.sample(&mut rng);
        while t < duration {
            if events.last().is_none_or(|&prev| t > prev) {
                events.push(t);
            }
            t += gap.sample(&mut rng);
        }
    }
    SpikeTrain::new(events, duration)
}

/// Mean event rate (Hz) in `[start, end)`.
pub fn measure_rate(train: &SpikeTrain, window: (f64, f64)) -> Result<f64> {
    let (start, end) = window;
    if !(start < end) {
        return Err(param("window", format!("empty window [{start}, {end})")));
    }
    if start < 0.0 || end > train.duration + 1e-9 {
        return Err(param(
            "window",
            format!("[{start}, {end}) outside [0, {}]", train.duration),
        ));
    }
    let ev = &train.events;
    let lo = ev.partition_point(|&t| t < start);
    let hi = ev.partition_point(|&t| t < end);
    Ok((hi - lo) as f64 / (end - start))
}

/// Per-source intervals during which input spikes are suppressed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    cuts: Vec<Vec<(f64, f64)>>,
}

impl FaultSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    /// `cuts[source]` lists that source's `(start, end)` intervals.
    pub fn new(mut cuts: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        for (s, list) in cuts.iter_mut().enumerate() {
            list.sort_by(|a, b| a.0.total_cmp(&b.0));
            for &(a, b) in list.iter() {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(param("cut_intervals", format!("source {s}: bad interval ({a}, {b})")));
                }
            }
            if list.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(param("cut_intervals", format!("source {s}: overlapping intervals")));
            }
        }
        Ok(Self { cuts })
    }

    /// Cut `source` from `start` onward.
    pub fn cut_from(source: usize, start: f64) -> Result<Self> {
        let mut cuts = vec![Vec::new(); source + 1];
        cuts[source].push((start, f64::MAX));
        Self::new(cuts)
    }

    pub fn intervals(&self, source: usize) -> &[(f64, f64)] {
        self.cuts.get(source).map_or(&[], |v| v.as_slice())
    }

    pub fn is_cut(&self, source: usize, t: f64) -> bool {
        self.intervals(source).iter().any(|&(a, b)| t >= a && t < b)
    }
}

/// Draw a Bernoulli outcome from a sequential generator.
pub(crate) fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_empty_train() {
        assert!(poisson_train(0.0, 100.0, 3).unwrap().is_empty());
    }

    #[test]
    fn trains_are_deterministic() {
        assert_eq!(poisson_train(60.0, 10.0, 9).unwrap(), poisson_train(60.0, 10.0, 9).unwrap());
        assert_ne!(poisson_train(60.0, 10.0, 9).unwrap(), poisson_train(60.0, 10.0, 10).unwrap());
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(poisson_train(-1.0, 1.0, 0).is_err());
        assert!(poisson_train(1.0, -1.0, 0).is_err());
        assert!(SpikeTrain::new(vec![0.2, 0.1], 1.0).is_err());
        assert!(SpikeTrain::new(vec![1.0], 1.0).is_err());
    }

    #[test]
    fn count_within_four_sigma() {
        let sd = 6000f64.sqrt();
        let outside = (0..1000)
            .filter(|&s| {
                let n = poisson_train(60.0, 100.0, s).unwrap().len() as f64;
                (n - 6000.0).abs() > 4.0 * sd
            })
            .count();
        assert!(outside <= 1, "{outside} seeds outside 4 sigma");
    }

    #[test]
    fn rate_measurement() {
        let empty = SpikeTrain::empty(2.0).unwrap();
        assert_eq!(measure_rate(&empty, (0.0, 1.0)).unwrap(), 0.0);
        let uniform = SpikeTrain::new((0..100).map(|i| i as f64 / 100.0).collect(), 1.0).unwrap();
        assert_eq!(measure_rate(&uniform, (0.0, 1.0)).unwrap(), 100.0);
        assert!(measure_rate(&uniform, (0.5, 0.5)).is_err());
        let mut ok = 0;
        for s in 0..200 {
            let r = measure_rate(&poisson_train(60.0, 100.0, s).unwrap(), (0.0, 100.0)).unwrap();
            if (r - 60.0).abs() <= 3.0 {
                ok += 1;
            }
        }
        assert!(ok >= 196, "{ok}/200 within 3 Hz");
    }

    #[test]
    fn schedule_validation() {
        assert!(FaultSchedule::new(vec![vec![(0.0, 2.0), (1.0, 3.0)]]).is_err());
        assert!(FaultSchedule::new(vec![vec![(2.0, 1.0)]]).is_err());
        let f = FaultSchedule::new(vec![vec![], vec![(1.0, 2.0)]]).unwrap();
        assert!(f.is_cut(1, 1.5) && !f.is_cut(1, 2.0) && !f.is_cut(0, 1.5) && !f.is_cut(7, 1.5));
    }
}
