//! Plug-in influence values of the log-rank numerator and the correlation
//! between log-rank statistics obtained by stacking them.
//!
//! For subject `i` and endpoint `j` the unstandardized value is
//!
//! ```text
//! [A_i - e(T_i)] delta_i
//!   - A_i   sum_{t <= T_i} dG0(t)
//!   +       sum_{t <= T_i} e(t) dG0(t)
//!   - A_i   sum_{t <= T_i} [1 - e(t)]   D(t)
//!   + A_i   sum_{t <= T_i} [1 - e(t)]^2 D(t)
//!   -       sum_{t}        Y1(t)/n [1 - e(t)]^2 D(t)
//!   + (1-A_i) sum_{t <= T_i} e(t)^2 D(t)
//!   -       sum_{t}        Y0(t)/n e(t)^2 D(t)
//! ```
//!
//! with `dG_a` the Nelson–Aalen increments, `D = dG1 - dG0` and `e` the
//! treated fraction of the risk set. The two centering sums run over every
//! event time; with that choice the values add up exactly to
//! `n * (G - E[G])`, where `E[G]` is [`expected_numerator`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TrialDataset;
use crate::error::{Error, Result};
use crate::survival::{Arm, EndpointTimeline};

/// Standardized influence values, stored one column per endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    columns: Vec<Vec<f64>>,
    endpoint_names: Vec<String>,
    scale: Vec<f64>,
}

impl InfluenceMatrix {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn endpoint_names(&self) -> &[String] {
        &self.endpoint_names
    }

    /// Standardization denominator `sqrt(pi (1 - pi) d_j / n)` per endpoint.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }
}

/// Symmetric, unit-diagonal matrix with entries in `[-1, 1]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    endpoint_names: Vec<String>,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(endpoint_names: Vec<String>, entries: Vec<f64>) -> Result<Self> {
        let j = endpoint_names.len();
        if entries.len() != j * j {
            return Err(Error::InvalidProblem(format!(
                "correlation matrix has {} entries, expected {}",
                entries.len(),
                j * j
            )));
        }
        for r in 0..j {
            if entries[r * j + r] != 1.0 {
                return Err(Error::InvalidProblem(format!(
                    "diagonal entry {r} is {} rather than 1",
                    entries[r * j + r]
                )));
            }
            for c in 0..r {
                let v = entries[r * j + c];
                if !(-1.0..=1.0).contains(&v) || v != entries[c * j + r] {
                    return Err(Error::InvalidProblem(format!(
                        "entry ({r}, {c}) = {v} is not a symmetric correlation"
                    )));
                }
            }
        }
        Ok(Self {
            endpoint_names,
            entries,
        })
    }

    pub fn from_rows(endpoint_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(endpoint_names, rows.concat())
    }

    pub fn identity(endpoint_names: Vec<String>) -> Self {
        let j = endpoint_names.len();
        let mut entries = vec![0.0; j * j];
        for r in 0..j {
            entries[r * j + r] = 1.0;
        }
        Self {
            endpoint_names,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.endpoint_names.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim() + c]
    }

    pub fn endpoint_names(&self) -> &[String] {
        &self.endpoint_names
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim().max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Sub-matrix for the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let entries = idx
            .iter()
            .flat_map(|&r| idx.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        Self {
            endpoint_names: idx.iter().map(|&i| self.endpoint_names[i].clone()).collect(),
            entries,
        }
    }

    pub(crate) fn from_entries_unchecked(endpoint_names: Vec<String>, entries: Vec<f64>) -> Self {
        Self {
            endpoint_names,
            entries,
        }
    }
}

/// Unstandardized influence values for one endpoint from raw columns.
pub(crate) fn raw_column(
    tl: &EndpointTimeline,
    treated: &[bool],
    times: &[f64],
    events: &[bool],
) -> Vec<f64> {
    let m = tl.len();
    let n = tl.n as f64;

    // Prefix sums over event times: entry k covers the first k event times.
    let mut dg0_sum = vec![0.0; m + 1];
    let mut e_dg0_sum = vec![0.0; m + 1];
    let mut e1_d_sum = vec![0.0; m + 1];
    let mut e1sq_d_sum = vec![0.0; m + 1];
    let mut esq_d_sum = vec![0.0; m + 1];
    let mut center_treated = 0.0;
    let mut center_control = 0.0;
    for k in 0..m {
        let e = tl.e_hat[k];
        let dg0 = tl.hazard_increment(Arm::Control, k);
        let diff = tl.hazard_increment(Arm::Treatment, k) - dg0;
        dg0_sum[k + 1] = dg0_sum[k] + dg0;
        e_dg0_sum[k + 1] = e_dg0_sum[k] + e * dg0;
        e1_d_sum[k + 1] = e1_d_sum[k] + (1.0 - e) * diff;
        e1sq_d_sum[k + 1] = e1sq_d_sum[k] + (1.0 - e) * (1.0 - e) * diff;
        esq_d_sum[k + 1] = esq_d_sum[k] + e * e * diff;
        center_treated += tl.y1[k] as f64 / n * (1.0 - e) * (1.0 - e) * diff;
        center_control += tl.y0[k] as f64 / n * e * e * diff;
    }

    (0..treated.len())
        .map(|i| {
            let k = tl.count_at_or_before(times[i]);
            let a = if treated[i] { 1.0 } else { 0.0 };
            // An event time is always listed, so it is the last one <= T_i.
            // Censored subjects multiply e(T_i) by zero.
            let jump = if events[i] { a - tl.e_hat[k - 1] } else { 0.0 };
            jump - a * dg0_sum[k] + e_dg0_sum[k] - a * e1_d_sum[k] + a * e1sq_d_sum[k]
                - center_treated
                + (1.0 - a) * esq_d_sum[k]
                - center_control
        })
        .collect()
}

fn timeline_for<'a>(
    data: &'a TrialDataset,
    endpoint: &str,
) -> Result<(EndpointTimeline, &'a [f64], &'a [bool])> {
    let j = data.endpoint_index(endpoint)?;
    let (times, events) = (data.times(j), data.events(j));
    let tl = EndpointTimeline::from_columns(data.treated(), times, events)
        .ok_or_else(|| Error::NoEvents(endpoint.to_string()))?;
    Ok((tl, times, events))
}

fn standardization(data: &TrialDataset, tl: &EndpointTimeline) -> f64 {
    let pi = data.pi_hat();
    (pi * (1.0 - pi) * tl.total_events as f64 / data.n() as f64).sqrt()
}

/// Unstandardized influence values for every subject.
pub fn raw_influence_column(data: &TrialDataset, endpoint: &str) -> Result<Vec<f64>> {
    let (tl, times, events) = timeline_for(data, endpoint)?;
    Ok(raw_column(&tl, data.treated(), times, events))
}

/// Standardized influence values for every subject, in dataset order.
pub fn influence_column(data: &TrialDataset, endpoint: &str) -> Result<Vec<f64>> {
    let (tl, times, events) = timeline_for(data, endpoint)?;
    let scale = standardization(data, &tl);
    let mut col = raw_column(&tl, data.treated(), times, events);
    col.iter_mut().for_each(|v| *v /= scale);
    Ok(col)
}

/// Plug-in non-centrality `(1/n) sum_t Y1 (1 - e) (dG1 - dG0)`.
pub fn expected_numerator(data: &TrialDataset, endpoint: &str) -> Result<f64> {
    let (tl, _, _) = timeline_for(data, endpoint)?;
    Ok(timeline_expected_numerator(&tl))
}

pub(crate) fn timeline_expected_numerator(tl: &EndpointTimeline) -> f64 {
    let s: f64 = (0..tl.len())
        .map(|k| {
            let diff =
                tl.hazard_increment(Arm::Treatment, k) - tl.hazard_increment(Arm::Control, k);
            tl.y1[k] as f64 * (1.0 - tl.e_hat[k]) * diff
        })
        .sum();
    s / tl.n as f64
}

pub fn influence_matrix(data: &TrialDataset, endpoints: &[String]) -> Result<InfluenceMatrix> {
    let cols = endpoints
        .par_iter()
        .map(|name| {
            let (tl, times, events) = timeline_for(data, name)?;
            let scale = standardization(data, &tl);
            let mut col = raw_column(&tl, data.treated(), times, events);
            col.iter_mut().for_each(|v| *v /= scale);
            Ok((col, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let (columns, scale) = cols.into_iter().unzip();
    Ok(InfluenceMatrix {
        columns,
        endpoint_names: endpoints.to_vec(),
        scale,
    })
}

/// Sample correlation of the influence columns. Endpoints may repeat.
pub fn correlation_matrix(data: &TrialDataset, endpoints: &[String]) -> Result<CorrelationMatrix> {
    let im = influence_matrix(data, endpoints)?;
    correlation_from_influence(&im)
}

pub fn correlation_from_influence(im: &InfluenceMatrix) -> Result<CorrelationMatrix> {
    let j = im.columns.len();
    let n = im.n() as f64;
    let centered: Vec<Vec<f64>> = im
        .columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            c.iter().map(|v| v - mean).collect()
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ss: Vec<f64> = centered.iter().map(|c| dot(c, c)).collect();
    for (k, &s) in ss.iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::ZeroDenominator(im.endpoint_names[k].clone()));
        }
    }

    let mut entries = vec![0.0; j * j];
    for r in 0..j {
        entries[r * j + r] = 1.0;
        for c in 0..r {
            let rho = (dot(&centered[r], &centered[c]) / (ss[r] * ss[c]).sqrt()).clamp(-1.0, 1.0);
            entries[r * j + c] = rho;
            entries[c * j + r] = rho;
        }
    }
    Ok(CorrelationMatrix::from_entries_unchecked(
        im.endpoint_names.clone(),
        entries,
    ))
}
