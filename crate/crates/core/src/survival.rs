//! Counting-process primitives for one endpoint: risk sets at the distinct
//! event times, Nelson–Aalen increments and the two-sample log-rank statistic.

use crate::dataset::TrialDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Control,
    Treatment,
}

/// Event counts and risk sets at each distinct event time of one endpoint.
///
/// `y0[k]`/`y1[k]` count subjects with observed time `>= times[k]`, so a
/// subject censored at an event time is still at risk there.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointTimeline {
    pub times: Vec<f64>,
    pub d0: Vec<usize>,
    pub d1: Vec<usize>,
    pub y0: Vec<usize>,
    pub y1: Vec<usize>,
    /// Treated fraction of the risk set, `y1 / (y0 + y1)`.
    pub e_hat: Vec<f64>,
    pub total_events: usize,
    /// Number of subjects in the dataset the timeline was built from.
    pub n: usize,
}

/// Right-continuous step function, zero before the first breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }
}

fn endpoint_columns<'a>(data: &'a TrialDataset, endpoint: &str) -> Result<(&'a [f64], &'a [bool])> {
    let j = data.endpoint_index(endpoint)?;
    Ok((data.times(j), data.events(j)))
}

pub fn build_timeline(data: &TrialDataset, endpoint: &str) -> Result<EndpointTimeline> {
    let (times, events) = endpoint_columns(data, endpoint)?;
    EndpointTimeline::from_columns(data.treated(), times, events)
        .ok_or_else(|| Error::NoEvents(endpoint.to_string()))
}

impl EndpointTimeline {
    /// Builds the timeline from raw columns; `None` when there are no events.
    pub fn from_columns(treated: &[bool], times: &[f64], events: &[bool]) -> Option<Self> {
        let n = treated.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&a, &b| times[a].total_cmp(&times[b]));

        let mut remaining = [0usize; 2];
        for &a in treated {
            remaining[a as usize] += 1;
        }

        let mut tl = EndpointTimeline {
            times: Vec::new(),
            d0: Vec::new(),
            d1: Vec::new(),
            y0: Vec::new(),
            y1: Vec::new(),
            e_hat: Vec::new(),
            total_events: 0,
            n,
        };

        let mut start = 0;
        while start < n {
            let t = times[order[start]];
            let mut end = start;
            let mut deaths = [0usize; 2];
            let mut leaving = [0usize; 2];
            while end < n && times[order[end]] == t {
                let i = order[end];
                let arm = treated[i] as usize;
                leaving[arm] += 1;
                if events[i] {
                    deaths[arm] += 1;
                }
                end += 1;
            }
            if deaths[0] + deaths[1] > 0 {
                let (y0, y1) = (remaining[0], remaining[1]);
                tl.times.push(t);
                tl.d0.push(deaths[0]);
                tl.d1.push(deaths[1]);
                tl.y0.push(y0);
                tl.y1.push(y1);
                tl.e_hat.push(y1 as f64 / (y0 + y1) as f64);
                tl.total_events += deaths[0] + deaths[1];
            }
            remaining[0] -= leaving[0];
            remaining[1] -= leaving[1];
            start = end;
        }

        if tl.total_events == 0 {
            None
        } else {
            Some(tl)
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Nelson–Aalen increment `d_A(t_k) / y_A(t_k)`, zero on an empty risk set.
    pub fn hazard_increment(&self, arm: Arm, k: usize) -> f64 {
        let (d, y) = match arm {
            Arm::Control => (self.d0[k], self.y0[k]),
            Arm::Treatment => (self.d1[k], self.y1[k]),
        };
        if y == 0 {
            0.0
        } else {
            d as f64 / y as f64
        }
    }

    /// Number of listed event times `<= t`.
    pub fn count_at_or_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Observed minus expected treated events, `n * G`.
    pub fn observed_minus_expected(&self) -> f64 {
        (0..self.len())
            .map(|k| self.d1[k] as f64 - self.e_hat[k] * (self.d0[k] + self.d1[k]) as f64)
            .sum()
    }

    /// Hypergeometric variance of the log-rank numerator `n * G`.
    pub fn hypergeometric_variance(&self) -> f64 {
        (0..self.len())
            .map(|k| {
                let y = (self.y0[k] + self.y1[k]) as f64;
                if y <= 1.0 {
                    return 0.0;
                }
                let d = (self.d0[k] + self.d1[k]) as f64;
                let (y0, y1) = (self.y0[k] as f64, self.y1[k] as f64);
                d * (y0 * y1 / (y * y)) * ((y - d) / (y - 1.0))
            })
            .sum()
    }
}

pub fn nelson_aalen(tl: &EndpointTimeline, arm: Arm) -> StepFunction {
    let mut acc = 0.0;
    let values = (0..tl.len())
        .map(|k| {
            acc += tl.hazard_increment(arm, k);
            acc
        })
        .collect();
    StepFunction {
        breakpoints: tl.times.clone(),
        values,
    }
}

/// Log-rank numerator `G = (1/n) * sum over events of (A_i - e_hat(t))`.
pub fn logrank_numerator(data: &TrialDataset, endpoint: &str) -> Result<f64> {
    let tl = build_timeline(data, endpoint)?;
    Ok(tl.observed_minus_expected() / data.n() as f64)
}

/// Standardized log-rank statistic, positive when the treatment arm has more
/// events than expected.
pub fn logrank_z(data: &TrialDataset, endpoint: &str) -> Result<f64> {
    let tl = build_timeline(data, endpoint)?;
    timeline_z(&tl).ok_or_else(|| Error::ZeroVariance(endpoint.to_string()))
}

pub(crate) fn timeline_z(tl: &EndpointTimeline) -> Option<f64> {
    let v = tl.hypergeometric_variance();
    if v > 0.0 {
        Some(tl.observed_minus_expected() / v.sqrt())
    } else {
        None
    }
}
