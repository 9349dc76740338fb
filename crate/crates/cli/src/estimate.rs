use std::path::PathBuf;

use clap::Args;
use lrcorr::{correlation_matrix, logrank_z, TrialDataset};
use serde::{Deserialize, Serialize};

use crate::error::{exit, CliError, Result};
use crate::input::{parse_composite, read_long_csv};
use crate::json;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Long-format CSV with header `subject_id,arm,endpoint,time,status`.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated endpoint names, or `all`.
    #[arg(long, default_value = "all")]
    pub endpoints: String,
    /// Build a composite endpoint at ingestion, e.g. `mace=min(mi,stroke)`.
    /// May be repeated; composites may refer to earlier composites.
    #[arg(long)]
    pub composite: Vec<String>,
    /// JSON output path; printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Accepted for uniformity with the other commands; the estimate is
    /// deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// The document written by `estimate`, also accepted by `power` as a
/// correlation source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub schema_version: u32,
    pub n: usize,
    pub endpoint_names: Vec<String>,
    /// Rows of the correlation matrix, in `endpoint_names` order.
    pub correlation: Vec<Vec<f64>>,
    pub events_per_endpoint: Vec<usize>,
    pub z_scores: Vec<f64>,
}

pub fn selected_endpoints(data: &TrialDataset, spec: &str) -> Result<Vec<String>> {
    if spec.trim() == "all" {
        return Ok(data.endpoint_names().to_vec());
    }
    let names: Vec<String> = spec
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(CliError::Config("no endpoints selected".into()));
    }
    for name in &names {
        data.endpoint_index(name)
            .map_err(|_| CliError::Config(format!("unknown endpoint {name}")))?;
    }
    Ok(names)
}

pub fn estimate(data: &TrialDataset, endpoints: &[String]) -> Result<EstimateOutput> {
    let corr = correlation_matrix(data, endpoints)?;
    let mut events = Vec::with_capacity(endpoints.len());
    let mut z = Vec::with_capacity(endpoints.len());
    for name in endpoints {
        events.push(data.event_count(data.endpoint_index(name)?));
        z.push(logrank_z(data, name)?);
    }
    Ok(EstimateOutput {
        schema_version: SCHEMA_VERSION,
        n: data.n(),
        endpoint_names: endpoints.to_vec(),
        correlation: corr.rows(),
        events_per_endpoint: events,
        z_scores: z,
    })
}

pub fn run(args: &EstimateArgs) -> Result<i32> {
    let mut data = read_long_csv(&args.input)?;
    for spec in &args.composite {
        let (name, a, b) = parse_composite(spec)?;
        data.add_composite(&name, &a, &b)
            .map_err(|e| CliError::Config(format!("composite {name}: {e}")))?;
    }
    let endpoints = selected_endpoints(&data, &args.endpoints)?;
    let out = estimate(&data, &endpoints)?;
    match &args.output {
        Some(path) => json::write(path, &out)?,
        None => print!("{}", json::to_string(&out)),
    }
    Ok(exit::OK)
}
