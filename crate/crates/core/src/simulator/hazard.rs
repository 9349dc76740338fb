use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardSegment {
    pub start: f64,
    pub rate: f64,
}

/// Piecewise-constant hazard; segment `k` applies on `[start_k, start_{k+1})`
/// and the last one extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHazard {
    segments: Vec<HazardSegment>,
}

impl PiecewiseHazard {
    pub fn new(segments: Vec<HazardSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidScenario("hazard needs at least one segment".into()));
        }
        if segments[0].start != 0.0 {
            return Err(Error::InvalidScenario("first hazard segment must start at 0".into()));
        }
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) || !w[1].start.is_finite() {
                return Err(Error::InvalidScenario(
                    "hazard segment starts must be strictly increasing".into(),
                ));
            }
        }
        if segments.iter().any(|s| !(s.rate > 0.0) || !s.rate.is_finite()) {
            return Err(Error::InvalidScenario("hazard rates must be positive".into()));
        }
        Ok(Self { segments })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![HazardSegment { start: 0.0, rate }])
    }

    pub fn segments(&self) -> &[HazardSegment] {
        &self.segments
    }

    /// Proportional hazards: every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.segments
                .iter()
                .map(|s| HazardSegment {
                    start: s.start,
                    rate: s.rate * factor,
                })
                .collect(),
        )
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, s) in self.segments.iter().enumerate() {
            if t <= s.start {
                break;
            }
            let end = self.segments.get(k + 1).map_or(f64::INFINITY, |n| n.start);
            acc += s.rate * (t.min(end) - s.start);
        }
        acc
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cumulative(t)).exp_m1()
    }

    /// Time at which the cumulative hazard reaches `h`.
    pub fn inverse_cumulative(&self, mut h: f64) -> f64 {
        for (k, s) in self.segments.iter().enumerate() {
            match self.segments.get(k + 1) {
                Some(next) => {
                    let cap = s.rate * (next.start - s.start);
                    if h <= cap {
                        return s.start + h / s.rate;
                    }
                    h -= cap;
                }
                None => return s.start + h / s.rate,
            }
        }
        unreachable!("hazard has at least one segment")
    }

    /// Time at which the distribution function reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.inverse_cumulative(-(-p).ln_1p())
    }
}

/// Inverse-transform draw: the event time whose survival probability is `u`.
pub fn inv_piecewise_exp(u: f64, hazard: &PiecewiseHazard) -> f64 {
    hazard.inverse_cumulative(-u.ln())
}
