//! Long-format trial data: one row per (subject, endpoint).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use lrcorr::{validate_dataset, RawDataset, SubjectRecord, TrialDataset};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 5] = ["subject_id", "arm", "endpoint", "time", "status"];

struct Subject {
    arm: u8,
    arm_line: u64,
    values: Vec<Option<(f64, u8)>>,
}

/// Reads and validates a long-format CSV file.
pub fn read_long_csv(path: &Path) -> Result<TrialDataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(path, None, format!("cannot open: {e}")))?;
    parse_long_csv(file, path)
}

pub fn parse_long_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let err = |line: Option<u64>, msg: String| CliError::input(path, line, msg);

    let header = rdr
        .headers()
        .map_err(|e| err(Some(1), format!("unreadable header: {e}")))?;
    if header.iter().ne(HEADER) {
        return Err(err(
            Some(1),
            format!("header must be `{}`", HEADER.join(",")),
        ));
    }

    let mut endpoint_names: Vec<String> = Vec::new();
    let mut endpoint_index: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut subjects: HashMap<String, Subject> = HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            err(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map(|p| p.line());
        let field = |k: usize| record.get(k).unwrap_or("");
        let id = field(0);
        if id.is_empty() {
            return Err(err(line, "empty subject_id".into()));
        }
        let arm = match field(1) {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(err(line, format!("arm `{other}` is not 0 or 1"))),
        };
        let endpoint = field(2);
        if endpoint.is_empty() {
            return Err(err(line, "empty endpoint".into()));
        }
        let time: f64 = field(3)
            .parse()
            .map_err(|_| err(line, format!("time `{}` is not a number", field(3))))?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(line, format!("time {time} must be finite and non-negative")));
        }
        let status = match field(4) {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(err(line, format!("status `{other}` is not 0 or 1"))),
        };

        let j = *endpoint_index
            .entry(endpoint.to_string())
            .or_insert_with(|| {
                endpoint_names.push(endpoint.to_string());
                endpoint_names.len() - 1
            });
        let subject = subjects.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            Subject {
                arm,
                arm_line: line.unwrap_or(0),
                values: Vec::new(),
            }
        });
        if subject.arm != arm {
            return Err(err(
                line,
                format!(
                    "subject {id} has arm {arm} here but arm {} on line {}",
                    subject.arm, subject.arm_line
                ),
            ));
        }
        if subject.values.len() <= j {
            subject.values.resize(j + 1, None);
        }
        if subject.values[j].is_some() {
            return Err(err(
                line,
                format!("duplicate row for subject {id}, endpoint {endpoint}"),
            ));
        }
        subject.values[j] = Some((time, status));
    }

    if order.is_empty() {
        return Err(err(None, "no data rows".into()));
    }
    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let s = subjects.remove(&id).expect("every listed subject was inserted");
        let mut observed_time = Vec::with_capacity(endpoint_names.len());
        let mut status = Vec::with_capacity(endpoint_names.len());
        for (j, name) in endpoint_names.iter().enumerate() {
            let Some((t, d)) = s.values.get(j).copied().flatten() else {
                return Err(err(None, format!("subject {id} has no row for endpoint {name}")));
            };
            observed_time.push(t);
            status.push(d);
        }
        records.push(SubjectRecord {
            id,
            arm: s.arm,
            observed_time,
            status,
        });
    }
    validate_dataset(RawDataset {
        endpoint_names,
        subjects: records,
    })
    .map_err(|e| err(None, e.to_string()))
}

/// Writes a dataset back out in the long format.
pub fn write_long_csv<W: Write>(data: &TrialDataset, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (i, id) in data.ids().iter().enumerate() {
        let arm = if data.treated()[i] { "1" } else { "0" };
        for (j, name) in data.endpoint_names().iter().enumerate() {
            let status = if data.events(j)[i] { "1" } else { "0" };
            w.write_record([
                id.as_str(),
                arm,
                name.as_str(),
                &data.times(j)[i].to_string(),
                status,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses `name=min(a,b)`.
pub fn parse_composite(spec: &str) -> Result<(String, String, String)> {
    let bad = || CliError::Config(format!("composite `{spec}` is not of the form name=min(a,b)"));
    let (name, rhs) = spec.split_once('=').ok_or_else(bad)?;
    let inner = rhs
        .trim()
        .strip_prefix("min(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(bad)?;
    let (a, b) = inner.split_once(',').ok_or_else(bad)?;
    let (name, a, b) = (name.trim(), a.trim(), b.trim());
    if name.is_empty() || a.is_empty() || b.is_empty() {
        return Err(bad());
    }
    Ok((name.to_string(), a.to_string(), b.to_string()))
}
