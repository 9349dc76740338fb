//! Subject-level trial data with one (time, status) pair per endpoint.
//!
//! `RawDataset` is what ingestion produces; `validate_dataset` turns it into a
//! `TrialDataset`, which is stored column-wise per endpoint and is the only
//! form the estimators accept.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// One participant as read from disk, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// 0 = control, 1 = treatment.
    pub arm: u8,
    pub observed_time: Vec<f64>,
    /// 0 = censored, 1 = event.
    pub status: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawDataset {
    pub endpoint_names: Vec<String>,
    pub subjects: Vec<SubjectRecord>,
}

/// A validated dataset: both arms present, every subject has a non-negative
/// time and a binary status for every endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    ids: Vec<String>,
    treated: Vec<bool>,
    endpoint_names: Vec<String>,
    times: Vec<Vec<f64>>,
    events: Vec<Vec<bool>>,
}

pub fn validate_dataset(raw: RawDataset) -> Result<TrialDataset> {
    let j = raw.endpoint_names.len();
    let mut ids = Vec::with_capacity(raw.subjects.len());
    let mut treated = Vec::with_capacity(raw.subjects.len());
    let mut times = vec![Vec::with_capacity(raw.subjects.len()); j];
    let mut events = vec![Vec::with_capacity(raw.subjects.len()); j];

    for s in raw.subjects {
        let arm = match s.arm {
            0 => false,
            1 => true,
            value => {
                return Err(Error::InvalidArm {
                    subject: s.id,
                    value,
                })
            }
        };
        if s.observed_time.len() != j || s.status.len() != j {
            return Err(Error::RaggedEndpoints {
                found: s.observed_time.len().min(s.status.len()),
                subject: s.id,
                expected: j,
            });
        }
        for (k, name) in raw.endpoint_names.iter().enumerate() {
            let t = s.observed_time[k];
            if !t.is_finite() {
                return Err(Error::NonFiniteTime {
                    subject: s.id,
                    endpoint: name.clone(),
                });
            }
            if t < 0.0 {
                return Err(Error::NegativeTime {
                    subject: s.id,
                    endpoint: name.clone(),
                    time: t,
                });
            }
            let event = match s.status[k] {
                0 => false,
                1 => true,
                value => {
                    return Err(Error::UnknownStatus {
                        subject: s.id,
                        endpoint: name.clone(),
                        value,
                    })
                }
            };
            times[k].push(t);
            events[k].push(event);
        }
        ids.push(s.id);
        treated.push(arm);
    }

    TrialDataset::from_columns(ids, treated, raw.endpoint_names, times, events)
}

impl TrialDataset {
    /// Builds a dataset from per-endpoint columns (`times[j][i]`), checking the
    /// same invariants as [`validate_dataset`].
    pub fn from_columns(
        ids: Vec<String>,
        treated: Vec<bool>,
        endpoint_names: Vec<String>,
        times: Vec<Vec<f64>>,
        events: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let n = treated.len();
        if n < 2 {
            return Err(Error::TooFewSubjects(n));
        }
        if ids.len() != n {
            return Err(Error::InvalidProblem(format!(
                "{} ids for {} subjects",
                ids.len(),
                n
            )));
        }
        let mut seen = HashSet::new();
        for name in &endpoint_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateEndpoint(name.clone()));
            }
        }
        if times.len() != endpoint_names.len() || events.len() != endpoint_names.len() {
            return Err(Error::InvalidProblem(
                "column count does not match endpoint count".into(),
            ));
        }
        for (k, name) in endpoint_names.iter().enumerate() {
            if times[k].len() != n || events[k].len() != n {
                let i = times[k].len().min(events[k].len()).min(n.saturating_sub(1));
                return Err(Error::RaggedEndpoints {
                    subject: ids[i].clone(),
                    found: times[k].len().min(events[k].len()),
                    expected: n,
                });
            }
            for (i, &t) in times[k].iter().enumerate() {
                if !t.is_finite() {
                    return Err(Error::NonFiniteTime {
                        subject: ids[i].clone(),
                        endpoint: name.clone(),
                    });
                }
                if t < 0.0 {
                    return Err(Error::NegativeTime {
                        subject: ids[i].clone(),
                        endpoint: name.clone(),
                        time: t,
                    });
                }
            }
        }
        let n1 = treated.iter().filter(|&&a| a).count();
        if n1 == n {
            return Err(Error::EmptyArm(0));
        }
        if n1 == 0 {
            return Err(Error::EmptyArm(1));
        }
        Ok(Self {
            ids,
            treated,
            endpoint_names,
            times,
            events,
        })
    }

    pub fn n(&self) -> usize {
        self.treated.len()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&a| a).count()
    }

    /// Observed allocation fraction to the treatment arm.
    pub fn pi_hat(&self) -> f64 {
        self.n_treated() as f64 / self.n() as f64
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    pub fn endpoint_names(&self) -> &[String] {
        &self.endpoint_names
    }

    pub fn endpoint_index(&self, name: &str) -> Result<usize> {
        self.endpoint_names
            .iter()
            .position(|e| e == name)
            .ok_or_else(|| Error::UnknownEndpoint(name.to_string()))
    }

    pub fn times(&self, endpoint: usize) -> &[f64] {
        &self.times[endpoint]
    }

    pub fn events(&self, endpoint: usize) -> &[bool] {
        &self.events[endpoint]
    }

    pub fn event_count(&self, endpoint: usize) -> usize {
        self.events[endpoint].iter().filter(|&&e| e).count()
    }

    /// Adds an endpoint whose observed time is the earlier of two existing
    /// endpoints. It is an event when the earlier observation is an event.
    pub fn add_composite(&mut self, name: &str, a: &str, b: &str) -> Result<()> {
        if self.endpoint_names.iter().any(|e| e == name) {
            return Err(Error::DuplicateEndpoint(name.to_string()));
        }
        let ia = self.endpoint_index(a)?;
        let ib = self.endpoint_index(b)?;
        let (ta, tb) = (&self.times[ia], &self.times[ib]);
        let (sa, sb) = (&self.events[ia], &self.events[ib]);
        let mut times = Vec::with_capacity(self.n());
        let mut events = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let t = ta[i].min(tb[i]);
            times.push(t);
            events.push((ta[i] == t && sa[i]) || (tb[i] == t && sb[i]));
        }
        self.endpoint_names.push(name.to_string());
        self.times.push(times);
        self.events.push(events);
        Ok(())
    }

    /// Returns the subject-level records in input order.
    pub fn to_records(&self) -> Vec<SubjectRecord> {
        (0..self.n())
            .map(|i| SubjectRecord {
                id: self.ids[i].clone(),
                arm: self.treated[i] as u8,
                observed_time: self.times.iter().map(|c| c[i]).collect(),
                status: self.events.iter().map(|c| c[i] as u8).collect(),
            })
            .collect()
    }
}
